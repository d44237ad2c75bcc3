"""CSDP-compatible command-line SDP solver backed by cvxpy/Clarabel.

Usage mirrors ``csdp``::

    python -m permflag.csdp problem.dat-s solution.sol

It reads an SDPA sparse file, solves ``max tr(CX) s.t. tr(A_i X) = a_i,
X >= 0``, prints CSDP-style status lines and writes a CSDP solution file
(dual vector ``y``, then ``Z`` entries as matrix 1 and ``X`` entries as
matrix 2).  Exit codes follow CSDP: 0 solved, 1 primal infeasible, 2 dual
infeasible, 3 partial success, 4 failure.
"""
from __future__ import annotations

import argparse
import re
import sys
import time
from collections import defaultdict

import numpy as np
import scipy.sparse as sp


def _header_numbers(line: str) -> list[float]:
    return [float(x.replace("D", "e")) for x in re.split(r"[\s,{}()]+", line) if x]


def read_sdpa(path: str):
    """Return (a, block_sizes, entries) with entries[mat][blk] = list of (i, j, v), 0-based."""
    with open(path) as fh:
        lines = [ln for ln in fh if ln.strip() and ln.lstrip()[0] not in '"*']
    m = int(_header_numbers(lines[0])[0])
    nblocks = int(_header_numbers(lines[1])[0])
    sizes = [int(x) for x in _header_numbers(lines[2])][:nblocks]
    # the rhs vector may wrap over several lines
    a: list[float] = []
    k = 3
    while len(a) < m:
        a.extend(_header_numbers(lines[k]))
        k += 1
    entries: dict[int, dict[int, list]] = defaultdict(lambda: defaultdict(list))
    for line in lines[k:]:
        parts = _header_numbers(line)
        if len(parts) < 5:
            continue
        mat, blk, i, j = (int(x) for x in parts[:4])
        entries[mat][blk - 1].append((i - 1, j - 1, parts[4]))
    return np.array(a[:m]), sizes, entries


def _block_operator(rows: dict[int, list], n: int, m: int) -> sp.csr_matrix:
    """Sparse (m, n*n) map X -> (tr(A_i X))_i for one square block."""
    r, c, v = [], [], []
    for con, items in rows.items():
        for i, j, val in items:
            r.append(con)
            c.append(i * n + j)
            v.append(val)
            if i != j:
                r.append(con)
                c.append(j * n + i)
                v.append(val)
    return sp.csr_matrix((v, (r, c)), shape=(m, n * n))


def _diag_operator(rows: dict[int, list], n: int, m: int) -> sp.csr_matrix:
    r, c, v = [], [], []
    for con, items in rows.items():
        for i, j, val in items:
            if i != j:
                raise ValueError("off-diagonal entry in a diagonal block")
            r.append(con)
            c.append(i)
            v.append(val)
    return sp.csr_matrix((v, (r, c)), shape=(m, n))


def _free_pairs(by_con: dict[int, list], cost: list, n: int) -> list[tuple[int, int]]:
    """Index pairs (p, q) of a diagonal block whose columns are exact negatives.

    Such a pair is a free variable split as x_p - x_q.  Handing the solver the
    split form leaves the dual without an interior point, so it is merged back.
    """
    cols: dict[int, dict[int, float]] = defaultdict(dict)
    for con, items in list(by_con.items()) + [(-1, cost)]:
        for i, _, v in items:
            cols[i][con] = cols[i].get(con, 0.0) + v
    key = {i: tuple(sorted((c, v) for c, v in col.items() if v)) for i, col in cols.items()}
    neg = {k: i for i, k in key.items()}
    pairs, used = [], set()
    for p in range(n):
        if p not in key or p in used or not key[p]:
            continue
        q = neg.get(tuple((c, -v) for c, v in key[p]))
        if q is not None and q != p and q not in used:
            pairs.append((p, q))
            used.update((p, q))
    return pairs


def solve_sdpa(path: str, tol: float = 1e-10, max_iter: int = 400, verbose: bool = False):
    """Solve an SDPA file; returns (problem, a, sizes, entries, block values, y)."""
    import cvxpy as cp

    a, sizes, entries = read_sdpa(path)
    m = len(a)
    cons, objective, lhs, getters = [], 0, 0, []
    for b, size in enumerate(sizes):
        n = abs(size)
        by_con = {con: entries[con + 1].get(b, []) for con in range(m)}
        by_con = {k: v for k, v in by_con.items() if v}
        cost = entries[0].get(b, [])
        if size > 0:
            X = cp.Variable((n, n), symmetric=True)
            cons.append(X >> 0)
            parts = [(cp.reshape(X, (n * n,), order="C"), _block_operator(by_con, n, m),
                      _block_operator({0: cost}, n, 1))]
            getters.append(lambda X=X: np.asarray(X.value))
        else:
            op, cvec = _diag_operator(by_con, n, m), _diag_operator({0: cost}, n, 1)
            pairs = _free_pairs(by_con, cost, n)
            dropped = {i for pair in pairs for i in pair}
            keep = [i for i in range(n) if i not in dropped]
            X = cp.Variable(len(keep), nonneg=True)
            parts = [(X, op[:, keep], cvec[:, keep])]
            F = None
            if pairs:
                F = cp.Variable(len(pairs))
                heads = [p for p, _ in pairs]
                parts.append((F, op[:, heads], cvec[:, heads]))

            def get(X=X, F=F, keep=keep, pairs=pairs, n=n):
                v = np.zeros(n)
                v[keep] = np.maximum(np.asarray(X.value), 0)
                for (p, q), z in zip(pairs, np.atleast_1d(F.value) if F is not None else ()):
                    v[p], v[q] = max(z, 0.0), max(-z, 0.0)
                return v
            getters.append(get)
        for var, op, cvec in parts:
            if op.nnz:
                lhs = lhs + op @ var
            if cvec.nnz:
                objective = objective + (cvec @ var)[0]
    eq = lhs == a
    prob = cp.Problem(cp.Maximize(objective), cons + [eq])
    prob.solve(solver=cp.CLARABEL, verbose=verbose, tol_gap_abs=tol, tol_gap_rel=tol,
               tol_feas=tol, tol_ktratio=1e-8, max_iter=max_iter)
    y = np.asarray(eq.dual_value, dtype=float).ravel() if eq.dual_value is not None else np.zeros(m)
    # cvxpy's multiplier sign convention differs from CSDP's; fix it via the dual objective
    if prob.value is not None and abs(a @ y + prob.value) < abs(a @ y - prob.value):
        y = -y
    values = [g() for g in getters] if prob.value is not None and np.isfinite(prob.value) else []
    return prob, a, sizes, entries, values, y


def _write_solution(fh, sizes, entries, values, y):
    fh.write(" ".join(f"{v:.18e}" for v in y) + "\n")
    for b, size in enumerate(sizes):
        n = abs(size)
        Z = np.zeros((n, n))
        for con, val in enumerate(y, start=1):
            for i, j, v in entries[con].get(b, []):
                Z[i, j] += val * v
                if i != j:
                    Z[j, i] += val * v
        for i, j, v in entries[0].get(b, []):
            Z[i, j] -= v
            if i != j:
                Z[j, i] -= v
        for i in range(n):
            for j in (range(i, n) if size > 0 else (i,)):
                if Z[i, j] != 0:
                    fh.write(f"1 {b + 1} {i + 1} {j + 1} {Z[i, j]:.18e}\n")
    for b, (size, val) in enumerate(zip(sizes, values)):
        if size > 0:
            n = size
            for i in range(n):
                for j in range(i, n):
                    if val[i, j] != 0:
                        fh.write(f"2 {b + 1} {i + 1} {j + 1} {val[i, j]:.18e}\n")
        else:
            for i, v in enumerate(val):
                if v != 0:
                    fh.write(f"2 {b + 1} {i + 1} {i + 1} {v:.18e}\n")


_STATUS_CODES = {"optimal": 0, "infeasible": 1, "unbounded": 2, "optimal_inaccurate": 3}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="permflag-csdp", description=__doc__.splitlines()[0])
    ap.add_argument("problem")
    ap.add_argument("solution")
    ap.add_argument("--tol", type=float, default=1e-10)
    ap.add_argument("--max-iter", type=int, default=400)
    ap.add_argument("--verbose", action="store_true")
    args = ap.parse_args(argv)
    start = time.perf_counter()
    try:
        prob, a, sizes, entries, values, y = solve_sdpa(args.problem, args.tol, args.max_iter,
                                                           args.verbose)
    except Exception as exc:  # solver crashes are reported CSDP-style
        print(f"Failure: {type(exc).__name__}: {exc}")
        return 4
    status = prob.status
    code = _STATUS_CODES.get(status, 4)
    print(f"Backend: cvxpy {prob.solver_stats.solver_name}, tol={args.tol:g}, status={status}")
    if code in (0, 3):
        primal = prob.value
        dual = float(a @ y)
        print("Success: SDP solved" if code == 0 else "Partial Success: SDP solved with reduced accuracy")
        print(f"Primal objective value: {primal:.16e}")
        print(f"Dual objective value: {dual:.16e}")
        print(f"Iterations: {prob.solver_stats.num_iters}")
        print(f"Elapsed time: {time.perf_counter() - start:.3f}")
        with open(args.solution, "w") as fh:
            _write_solution(fh, sizes, entries, values, y)
    else:
        print(f"Failure: solver status {status}")
    return code


if __name__ == "__main__":
    sys.exit(main())
