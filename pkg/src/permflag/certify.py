"""Exact rational certificates from numeric SDP solutions.

A certificate stores a lower-triangular rational factor L per type.  Its
Gram matrix Q = L L^T is PSD by construction, so checking the certificate
needs only exact arithmetic: rebuild the coefficient tables, evaluate
p(S, P) + alpha(P) for every admissible P and compare the maximum with the
claimed bound.
"""
from __future__ import annotations

import json
import logging
import math
import os
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .flags import Flag, FlagProductTable, build_product_table
from .perm import ForbiddenSet, Perm, format_perm, parse_perm
from .sdp import NumericSolution, SdpProblem, assemble, effective_forbidden, solve

log = logging.getLogger(__name__)

DEFAULT_K = 30
EPSILON_SHIFT = 1e-8


class NonCertifiableSolution(ValueError):
    pass


class CertificateError(ValueError):
    """Malformed certificate; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class RationalMatrix:
    rows: tuple[tuple[Fraction, ...], ...]

    @classmethod
    def from_rows(cls, rows) -> "RationalMatrix":
        return cls(tuple(tuple(Fraction(x) for x in r) for r in rows))

    @classmethod
    def zeros(cls, n: int) -> "RationalMatrix":
        return cls(tuple((Fraction(0),) * n for _ in range(n)))

    @property
    def dim(self) -> int:
        return len(self.rows)

    def is_square(self) -> bool:
        return all(len(r) == self.dim for r in self.rows)

    def is_lower_triangular(self) -> bool:
        return all(x == 0 for i, r in enumerate(self.rows) for x in r[i + 1:])

    def has_nonnegative_diagonal(self) -> bool:
        return all(self.rows[i][i] >= 0 for i in range(self.dim))

    def scaled_integers(self) -> tuple[list[list[int]], int]:
        """(M, d) with integer matrix M and self = M / d."""
        d = 1
        for r in self.rows:
            for x in r:
                d = math.lcm(d, x.denominator)
        return [[int(x * d) for x in r] for r in self.rows], d

    def gram(self) -> "RationalMatrix":
        ints, d = self.scaled_integers()
        g = _int_gram(ints)
        dd = d * d
        return RationalMatrix(tuple(tuple(Fraction(x, dd) for x in r) for r in g))

    def to_numpy(self) -> np.ndarray:
        return np.array([[float(x) for x in r] for r in self.rows], dtype=float).reshape(self.dim, -1)


def _int_gram(L: list[list[int]]) -> list[list[int]]:
    n = len(L)
    G = [[0] * n for _ in range(n)]
    for i in range(n):
        Li = L[i]
        for j in range(i + 1):
            Lj = L[j]
            v = sum(a * b for a, b in zip(Li[:j + 1], Lj[:j + 1]))
            G[i][j] = G[j][i] = v
    return G


def psd_factor(Q: np.ndarray, neg_tol: float = 1e-4, floor: float = 0.0) -> np.ndarray:
    """Lower-triangular L with non-negative diagonal and L L^T = Q projected onto the PSD cone.

    Rank-deficient and slightly indefinite inputs are fine: negative
    eigenvalues are clipped, and L is the transposed R factor of a QR
    decomposition of (V sqrt(w))^T, which is stable where an unpivoted
    Cholesky of a singular matrix is not.  Eigenvalues below ``floor`` are
    treated as zero.
    """
    Q = (Q + Q.T) / 2
    n = Q.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    w, V = np.linalg.eigh(Q)
    scale = max(1.0, float(np.abs(w).max()))
    if w.min() < -neg_tol * scale:
        raise NonCertifiableSolution(f"eigenvalue {w.min():.3e}; matrix is not PSD")
    B = V * np.sqrt(np.where(w < floor, 0.0, np.clip(w, 0.0, None)))
    R = np.linalg.qr(B.T, mode="r")
    signs = np.where(np.diag(R) < 0, -1.0, 1.0)
    return (signs[:, None] * R).T


def round_factor(L: np.ndarray, k: int) -> RationalMatrix:
    """Round to multiples of 2^-k, keep the lower triangle, clamp negative diagonal to 0."""
    scale = 1 << k
    n = L.shape[0]
    rows = []
    for i in range(n):
        row = []
        for j in range(n):
            if j > i:
                row.append(Fraction(0))
                continue
            v = Fraction(int(round(float(L[i, j]) * scale)), scale)
            if i == j and v < 0:
                v = Fraction(0)
            row.append(v)
        rows.append(tuple(row))
    return RationalMatrix(tuple(rows))


def round_solution(sol: NumericSolution, k: int = DEFAULT_K, epsilon_shift: float = 0.0,
                   floor: float = 0.0) -> tuple[list[RationalMatrix], float]:
    """Exact L factors for every Q block of ``sol`` and the diagonal shift that was applied.

    By default negative eigenvalues are simply clipped.  With a positive
    ``epsilon_shift``, blocks whose smallest eigenvalue is below
    ``-epsilon_shift`` are shifted by ``epsilon_shift * I`` first, which costs
    roughly ``epsilon_shift`` in the final bound.
    """
    shift = 0.0
    if epsilon_shift > 0:
        for Q in sol.q_matrices:
            if Q.size and np.linalg.eigvalsh((Q + Q.T) / 2).min() < -epsilon_shift:
                shift = epsilon_shift
    factors = []
    for Q in sol.q_matrices:
        Qs = Q + shift * np.eye(Q.shape[0])
        factors.append(round_factor(psd_factor(Qs, floor=floor), k))
    return factors, shift


def exact_alphas(problem: SdpProblem, l_matrices: Sequence[RationalMatrix]) -> list[Fraction]:
    """alpha(P) = sum over types of <L L^T, C^tau(P)> for every admissible P, exactly."""
    if len(l_matrices) != len(problem.tables):
        raise ValueError(f"expected {len(problem.tables)} L matrices, got {len(l_matrices)}")
    alphas = [Fraction(0)] * problem.num_constraints
    for table, L in zip(problem.tables, l_matrices):
        if L.dim != table.size or not L.is_square():
            raise ValueError(f"L matrix of dim {L.dim} for a block of size {table.size}")
        ints, d = L.scaled_integers()
        G = _int_gram(ints)
        den = d * d * table.denominator
        for pi, row in enumerate(table.counts):
            num = 0
            for i, j, c in row:
                num += c * G[i][j] * (1 if i == j else 2)
            if num:
                alphas[pi] += Fraction(num, den)
    return alphas


def exact_bound(problem: SdpProblem, l_matrices: Sequence[RationalMatrix]) -> tuple[Fraction, Perm]:
    """max over P of p(S, P) + alpha(P), with the maximising P."""
    alphas = exact_alphas(problem, l_matrices)
    best = max(range(problem.num_constraints),
               key=lambda pi: (problem.objective_densities[pi] + alphas[pi], -pi))
    return problem.objective_densities[best] + alphas[best], problem.admissible[best]


# --------------------------------------------------------------------- certificates


@dataclass
class Certificate:
    pattern: Perm
    forbidden: ForbiddenSet
    N: int
    layered_only: bool
    admissible: list[Perm]
    types: list[tuple[Perm, int, list[Flag]]]
    l_matrices: list[RationalMatrix]
    bound: Fraction
    witness: Perm
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "pattern": format_perm(self.pattern),
            "forbidden": self.forbidden.strings(),
            "n": self.N,
            "layered_only": self.layered_only,
            "admissible": [format_perm(p) for p in self.admissible],
            "types": [{"type": format_perm(tau), "m": m,
                       "flags": [{"base": format_perm(f.base), "support": [i + 1 for i in f.support]}
                                 for f in flags]}
                      for tau, m, flags in self.types],
            "l_matrices": [[[str(x) for x in row] for row in L.rows] for L in self.l_matrices],
            "bound": _frac_str(self.bound),
            "witness": format_perm(self.witness),
            "meta": self.meta,
        }

    @classmethod
    def from_json(cls, data: dict) -> "Certificate":
        if not isinstance(data, dict):
            raise CertificateError("<root>", "certificate must be a JSON object")
        extra = set(data) - _KEYS
        if extra:
            warnings.warn(f"ignoring unknown certificate fields: {sorted(extra)}", stacklevel=2)
        for key in _KEYS - {"meta"}:
            if key not in data:
                raise CertificateError(key, "missing")
        pattern = _field(parse_perm, data["pattern"], "pattern")
        forbidden = _field(lambda v: ForbiddenSet(tuple(parse_perm(x) for x in v)),
                           data["forbidden"], "forbidden")
        N = data["n"]
        if not isinstance(N, int) or isinstance(N, bool) or N < 1:
            raise CertificateError("n", f"expected a positive integer, got {N!r}")
        if not isinstance(data["layered_only"], bool):
            raise CertificateError("layered_only", "expected a boolean")
        admissible = _field(lambda v: [parse_perm(x) for x in v], data["admissible"], "admissible")
        types = []
        for ti, entry in enumerate(_field(list, data["types"], "types")):
            where = f"types[{ti}]"
            try:
                tau = parse_perm(entry["type"])
                m = int(entry["m"])
                flags = [Flag(parse_perm(f["base"]), tuple(int(i) - 1 for i in f["support"]))
                         for f in entry["flags"]]
            except (KeyError, TypeError, ValueError) as exc:
                raise CertificateError(where, str(exc)) from exc
            types.append((tau, m, flags))
        ls = []
        for li, mat in enumerate(_field(list, data["l_matrices"], "l_matrices")):
            ls.append(_field(lambda v: RationalMatrix.from_rows(v), mat, f"l_matrices[{li}]"))
        bound = _field(Fraction, data["bound"], "bound")
        witness = _field(parse_perm, data["witness"], "witness")
        meta = data.get("meta", {})
        if not isinstance(meta, dict):
            raise CertificateError("meta", "expected an object")
        return cls(pattern, forbidden, N, data["layered_only"], admissible, types, ls,
                   bound, witness, meta)


_KEYS = {"pattern", "forbidden", "n", "layered_only", "admissible", "types", "l_matrices",
         "bound", "witness", "meta"}


def _frac_str(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


def _field(conv, value, name):
    try:
        return conv(value)
    except (TypeError, ValueError, ZeroDivisionError, KeyError, AttributeError) as exc:
        raise CertificateError(name, str(exc)) from exc


def write_certificate(cert: Certificate, path: str | os.PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(cert.to_json(), indent=1) + "\n")
    return path


def read_certificate(path: str | os.PathLike) -> Certificate:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CertificateError(f"line {exc.lineno}", exc.msg) from exc
    return Certificate.from_json(data)


EIGEN_FLOORS = (0.0, 1e-10, 1e-8, 1e-6)


def make_certificate(problem: SdpProblem, l_matrices: list[RationalMatrix], k: int,
                     shift: float, floor: float = 0.0) -> Certificate:
    bound, witness = exact_bound(problem, l_matrices)
    meta = {"k": k, "epsilon_shift": _frac_str(Fraction(shift)),
            "eigen_floor": _frac_str(Fraction(floor)), "tool_version": __version__}
    types = [(t.tau, t.m, t.flags) for t in problem.tables]
    return Certificate(problem.density_pattern, problem.forbidden, problem.N, problem.layered_only,
                       problem.admissible, types, l_matrices, bound, witness, meta)


def certify_solution(problem: SdpProblem, sol: NumericSolution, k: int = DEFAULT_K,
                     epsilon_shift: float = 0.0, floors=EIGEN_FLOORS) -> Certificate:
    """Round ``sol`` once per eigenvalue floor and keep the smallest exact bound.

    Interior-point solvers stop just inside the PSD cone, so eigenvalues that
    should be zero come back as small positives; dropping them usually helps.
    """
    best = None
    for floor in floors:
        factors, shift = round_solution(sol, k, epsilon_shift, floor)
        cert = make_certificate(problem, factors, k, shift, floor)
        log.info("eigen floor %g: bound %.12f", floor, float(cert.bound))
        if best is None or cert.bound < best.bound:
            best = cert
    return best


def upper_bound(s: Perm, N: int, forbidden: ForbiddenSet = ForbiddenSet(), layered_only: bool = False,
                *, solver: str | None = None, k: int = DEFAULT_K, timeout: float = 3600,
                epsilon_shift: float = 0.0, use_cache: bool = True,
                workers: int = 1) -> tuple[Certificate, NumericSolution]:
    """assemble -> solve -> round -> exact bound."""
    problem = assemble(s, N, forbidden, layered_only, use_cache=use_cache, workers=workers)
    sol = solve(problem, solver, timeout)
    return certify_solution(problem, sol, k, epsilon_shift), sol


# --------------------------------------------------------------------- verification


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class VerificationReport:
    checks: list[Check] = field(default_factory=list)
    recomputed_bound: Fraction | None = None

    @property
    def ok(self) -> bool:
        return bool(self.checks) and all(c.passed for c in self.checks)

    def add(self, name: str, passed: bool, detail: str = "") -> bool:
        self.checks.append(Check(name, passed, detail))
        return passed

    def __str__(self):
        lines = [f"[{'PASS' if c.passed else 'FAIL'}] {c.name}" + (f": {c.detail}" if c.detail else "")
                 for c in self.checks]
        lines.append("certificate " + ("VERIFIED" if self.ok else "REJECTED"))
        return "\n".join(lines)


def verify(cert: Certificate, workers: int = 1) -> VerificationReport:
    """Rebuild everything from the certificate's problem statement and recheck the bound.

    Never reads the table cache.
    """
    rep = VerificationReport()
    forb = effective_forbidden(cert.forbidden, cert.layered_only)
    if not rep.add("pattern length", len(cert.pattern) <= cert.N,
                   f"|pattern|={len(cert.pattern)}, n={cert.N}"):
        return rep
    problem = assemble(cert.pattern, cert.N, cert.forbidden, cert.layered_only,
                       use_cache=False, workers=workers)
    rep.add("admissible permutations", cert.admissible == problem.admissible,
            f"{len(cert.admissible)} listed, {len(problem.admissible)} expected")
    expected_types = [(t.tau, t.m, t.flags) for t in problem.tables]
    same_types = [(tau, m) for tau, m, _ in cert.types] == [(tau, m) for tau, m, _ in expected_types]
    rep.add("types", same_types, f"{len(cert.types)} listed, {len(expected_types)} expected")
    bad_flags = [format_perm(tau) or "()" for (tau, m, fl), (_, _, efl) in zip(cert.types, expected_types)
                 if fl != efl]
    rep.add("flags", same_types and not bad_flags,
            "" if not bad_flags else f"mismatched flag lists for types {bad_flags}")
    dims_ok = len(cert.l_matrices) == len(problem.tables) and all(
        L.is_square() and L.dim == t.size for L, t in zip(cert.l_matrices, problem.tables))
    rep.add("L dimensions", dims_ok, f"{len(cert.l_matrices)} matrices")
    lower = [i for i, L in enumerate(cert.l_matrices) if not L.is_lower_triangular()]
    rep.add("L lower-triangular", not lower, f"offending blocks {lower}" if lower else "")
    negdiag = [i for i, L in enumerate(cert.l_matrices) if L.is_square() and not L.has_nonnegative_diagonal()]
    rep.add("L diagonal non-negative", not negdiag, f"offending blocks {negdiag}" if negdiag else "")
    if not dims_ok:
        rep.add("bound", False, "cannot evaluate with mismatched dimensions")
        return rep
    alphas = exact_alphas(problem, cert.l_matrices)
    values = [d + a for d, a in zip(problem.objective_densities, alphas)]
    bound = max(values)
    rep.recomputed_bound = bound
    rep.add("bound", bound <= cert.bound,
            f"recomputed {float(bound):.12f} vs claimed {float(cert.bound):.12f}")
    try:
        at_witness = values[problem.admissible.index(cert.witness)]
    except ValueError:
        at_witness = None
    rep.add("witness", at_witness == bound, f"witness {format_perm(cert.witness)}")
    return rep
