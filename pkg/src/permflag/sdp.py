"""Assemble the flag-algebra SDP, write it in SDPA sparse format, run a solver.

The SDP is the CSDP primal

    max  tr(C X)   s.t.  tr(A_P X) = -p(S, P)  for every admissible P,  X >= 0,

with X = diag(Q^tau blocks..., s_P..., u, v).  Constraint P reads
``<C^tau(P), Q^tau> + p(S, P) + s_P = v - u``, so ``b = v - u`` bounds every
``p(S, P) + alpha(P)`` and the primal objective ``u - v`` equals ``-b``.
"""
from __future__ import annotations

import logging
import os
import re
import shutil
import subprocess
import sys
import tempfile
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .flags import FlagProductTable, admissible_pairs, build_product_table, enumerate_types
from .perm import (EMPTY, LAYERED_BASIS, ForbiddenSet, Perm, density, enumerate_perms,
                   format_perm, is_layered)

log = logging.getLogger(__name__)

SOLVER_ENV = "PERMFLAG_SOLVER"


@dataclass
class SdpProblem:
    density_pattern: Perm
    N: int
    forbidden: ForbiddenSet
    layered_only: bool
    admissible: list[Perm]
    objective_densities: list[Fraction]
    tables: list[FlagProductTable]

    @property
    def block_sizes(self) -> list[int]:
        return [t.size for t in self.tables]

    @property
    def num_constraints(self) -> int:
        return len(self.admissible)


@dataclass(frozen=True)
class NumericSolution:
    objective_value: float
    q_matrices: list[np.ndarray] = field(repr=False)
    solver_log: str = field(repr=False, default="")


class SolverError(RuntimeError):
    def __init__(self, message: str, log_text: str = ""):
        super().__init__(message)
        self.log = log_text


class SolverNotFound(SolverError):
    pass


class SolverFailed(SolverError):
    pass


class SolverTimeout(SolverError):
    pass


class SolverOutputError(SolverError):
    pass


def effective_forbidden(forbidden: ForbiddenSet, layered_only: bool) -> ForbiddenSet:
    # layered permutations are exactly Av(231, 312)
    return forbidden.union(LAYERED_BASIS) if layered_only else forbidden


def crude_bound(s: Perm, N: int, forbidden: ForbiddenSet = EMPTY) -> Fraction:
    """max over admissible P of length N of p(s, P)."""
    if len(s) > N:
        raise ValueError(f"|s| = {len(s)} exceeds N = {N}")
    return max(density(s, p) for p in enumerate_perms(N, forbidden))


def assemble(s: Perm, N: int, forbidden: ForbiddenSet = EMPTY, layered_only: bool = False, *,
             use_cache: bool = False, workers: int = 1) -> SdpProblem:
    if len(s) > N:
        raise ValueError(f"|s| = {len(s)} exceeds N = {N}")
    if layered_only and not is_layered(s):
        raise ValueError(f"layered-only mode needs a layered pattern, got {format_perm(s)}")
    forb = effective_forbidden(forbidden, layered_only)
    admissible = enumerate_perms(N, forb)
    tables = []
    for t, m in admissible_pairs(N):
        for tau in enumerate_types(t, forb):
            table = build_product_table(N, tau, m, forb, use_cache=use_cache, workers=workers)
            if table.size:
                tables.append(table)
    return SdpProblem(s, N, forbidden, layered_only, admissible,
                      [density(s, p) for p in admissible], tables)


def _num(x) -> str:
    return repr(float(x))


def emit_sdpa(problem: SdpProblem, path: str | os.PathLike) -> Path:
    """Write ``problem`` in SDPA sparse format (see module docstring for the layout)."""
    path = Path(path)
    n_con = problem.num_constraints
    nb = len(problem.tables)
    slack = nb + 1
    lines = [str(n_con), str(nb + 1),
             " ".join([str(t.size) for t in problem.tables] + [str(-(n_con + 2))]),
             " ".join(_num(-d) for d in problem.objective_densities)]
    lines.append(f"0 {slack} {n_con + 1} {n_con + 1} 1.0")
    lines.append(f"0 {slack} {n_con + 2} {n_con + 2} -1.0")
    for pi in range(n_con):
        for b, table in enumerate(problem.tables, start=1):
            for i, j, c in table.counts[pi]:
                lines.append(f"{pi + 1} {b} {i + 1} {j + 1} {_num(Fraction(c, table.denominator))}")
        lines.append(f"{pi + 1} {slack} {pi + 1} {pi + 1} 1.0")
        lines.append(f"{pi + 1} {slack} {n_con + 1} {n_con + 1} 1.0")
        lines.append(f"{pi + 1} {slack} {n_con + 2} {n_con + 2} -1.0")
    path.write_text("\n".join(lines) + "\n")
    return path


def resolve_solver(solver: str | None = None) -> list[str]:
    """Command prefix for the solver: explicit value, then $PERMFLAG_SOLVER, then the bundled one."""
    solver = solver or os.environ.get(SOLVER_ENV)
    if not solver:
        return [sys.executable, "-m", "permflag.csdp"]
    exe = shutil.which(solver)
    if exe is None:
        raise SolverNotFound(f"solver {solver!r} not found")
    return [exe]


_OBJ = re.compile(r"Primal objective value:\s*(\S+)")


def read_solution_file(path: Path, block_sizes: list[int]) -> list[np.ndarray]:
    """Primal X blocks (matrix number 2) from a CSDP-style solution file."""
    mats = [np.zeros((n, n)) for n in block_sizes]
    with open(path) as fh:
        fh.readline()  # dual vector y
        for line in fh:
            parts = line.split()
            if len(parts) != 5:
                continue
            matno, blk, i, j = (int(x) for x in parts[:4])
            if matno != 2 or blk > len(block_sizes):
                continue
            v = float(parts[4].replace("D", "e"))
            mats[blk - 1][i - 1, j - 1] = v
            mats[blk - 1][j - 1, i - 1] = v
    return mats


def run_solver(path: str | os.PathLike, block_sizes: list[int], solver: str | None = None,
               timeout: float = 3600) -> NumericSolution:
    """Run a CSDP-compatible solver on an SDPA file; objective returned as the positive bound."""
    cmd = resolve_solver(solver)
    path = Path(path)
    with tempfile.TemporaryDirectory() as tmp:
        sol = Path(tmp) / "solution.sol"
        try:
            proc = subprocess.run(cmd + [str(path), str(sol)], capture_output=True,
                                  text=True, timeout=timeout)
        except FileNotFoundError as exc:
            raise SolverNotFound(str(exc)) from exc
        except subprocess.TimeoutExpired as exc:
            out = exc.stdout or ""
            if isinstance(out, bytes):
                out = out.decode(errors="replace")
            raise SolverTimeout(f"solver exceeded {timeout}s", out) from exc
        text = proc.stdout + proc.stderr
        if proc.returncode == 3:
            # CSDP "partial success": the iterate is usable, rounding decides
            log.warning("solver reported reduced accuracy; continuing with its solution")
        elif proc.returncode != 0:
            raise SolverFailed(f"solver exited with status {proc.returncode}", text)
        match = _OBJ.search(proc.stdout)
        if match is None or not sol.exists():
            raise SolverOutputError("no primal objective / solution file in solver output", text)
        try:
            value = -float(match.group(1).replace("D", "e"))
            mats = read_solution_file(sol, block_sizes)
        except ValueError as exc:
            raise SolverOutputError(f"unparseable solver output: {exc}", text) from exc
    return NumericSolution(value, mats, text)


def solve(problem: SdpProblem, solver: str | None = None, timeout: float = 3600,
          workdir: str | os.PathLike | None = None) -> NumericSolution:
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(workdir or tmp) / f"sdp_{format_perm(problem.density_pattern)}_n{problem.N}.dat-s"
        emit_sdpa(problem, path)
        return run_solver(path, problem.block_sizes, solver, timeout)
