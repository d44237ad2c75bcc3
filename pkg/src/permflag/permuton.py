"""Block permutons: recursive grids of monotone segments and named maximisers.

A :class:`Grid` places one child in each row and each column (an inflation
of a permutation by smaller permutons).  A :class:`Recurse` cell stands for
a scaled copy of its enclosing grid, which gives the self-similar
constructions used for lower bounds.  Pattern densities are evaluated
exactly by summing over assignments of the pattern's points to cells, and
by Monte Carlo sampling as an independent check.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations_with_replacement
from typing import Union

import numpy as np

from .perm import Perm, complement as perm_complement, format_perm, parse_perm, reverse as perm_reverse, standardize

SQRT3 = math.sqrt(3.0)
LAMBDA = 2 * SQRT3 - 3
_C = (math.sqrt(2.0) - 1) ** (1 / 3)
BETA = 6 * _C - 6 / _C + 4
GAMMA = LAMBDA * BETA


def _kappa() -> float:
    # 3x^4 - 4x + 1 = (x - 1)(3x^3 + 3x^2 + 3x - 1); bisect the cubic on (0, 1)
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = (lo + hi) / 2
        if 3 * mid ** 3 + 3 * mid ** 2 + 3 * mid - 1 < 0:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


KAPPA = _kappa()
#: relative size of the recursive part of the 132-maximiser
U132 = (SQRT3 - 1) / 2


@dataclass(frozen=True)
class Decreasing:
    pass


@dataclass(frozen=True)
class Increasing:
    pass


@dataclass(frozen=True)
class Recurse:
    pass


@dataclass(frozen=True)
class Maximiser:
    """Named extremal permuton, expanded on demand into a recursive grid."""

    pattern: Perm

    def expand(self) -> "Grid":
        try:
            return _MAXIMISERS[self.pattern]()
        except KeyError:
            raise UnsupportedPattern(f"no maximiser known for {format_perm(self.pattern)}") from None


@dataclass(frozen=True)
class Cell:
    row: int
    col: int
    node: "Node"


@dataclass(frozen=True)
class Grid:
    """Cells with exactly one occupied cell per row and per column.

    ``rows[r]`` and ``cols[c]`` are masses, bottom to top and left to right.
    """

    rows: tuple
    cols: tuple
    cells: tuple[Cell, ...]

    def __post_init__(self):
        k = len(self.cols)
        if len(self.rows) != k or len(self.cells) != k:
            raise ValueError("grid needs as many rows and cells as columns")
        if sorted(c.col for c in self.cells) != list(range(k)) or sorted(c.row for c in self.cells) != list(range(k)):
            raise ValueError("each row and column must hold exactly one cell")
        if any(m <= 0 for m in self.rows) or any(m <= 0 for m in self.cols):
            raise ValueError("row and column masses must be positive")
        if abs(sum(self.rows) - 1) > 1e-12 or abs(sum(self.cols) - 1) > 1e-12:
            raise ValueError("row and column masses must each sum to 1")
        for c in self.cells:
            if abs(self.rows[c.row] - self.cols[c.col]) > 1e-12:
                raise ValueError(f"cell ({c.row}, {c.col}) is not square: mass differs by row and column")
        if sum(isinstance(c.node, Recurse) for c in self.cells) > 1:
            raise ValueError("at most one Recurse cell per grid")
        # cells are kept in column order
        object.__setattr__(self, "cells", tuple(sorted(self.cells, key=lambda c: c.col)))

    @classmethod
    def inflate(cls, pattern: Perm, masses, children) -> "Grid":
        """Inflation of ``pattern``: column i holds ``children[i]`` in row pattern[i] - 1."""
        masses = tuple(masses)
        rows = [0] * len(pattern)
        for i, v in enumerate(pattern):
            rows[v - 1] = masses[i]
        cells = tuple(Cell(v - 1, i, ch) for i, (v, ch) in enumerate(zip(pattern, children)))
        return cls(tuple(rows), masses, cells)

    @property
    def pattern(self) -> Perm:
        return tuple(c.row + 1 for c in self.cells)

    @property
    def masses(self) -> tuple:
        return tuple(self.cols[c.col] for c in self.cells)


Node = Union[Decreasing, Increasing, Recurse, Maximiser, Grid]


class UnsupportedPattern(ValueError):
    pass


# --------------------------------------------------------------------- symmetries


def reverse(node: Node) -> Node:
    """Mirror left-right."""
    if isinstance(node, Decreasing):
        return Increasing()
    if isinstance(node, Increasing):
        return Decreasing()
    if isinstance(node, Maximiser):
        return Maximiser(perm_reverse(node.pattern))
    if isinstance(node, Grid):
        k = len(node.cols)
        return Grid(node.rows, tuple(reversed(node.cols)),
                    tuple(Cell(c.row, k - 1 - c.col, reverse(c.node)) for c in node.cells))
    return node


def complement(node: Node) -> Node:
    """Mirror top-bottom."""
    if isinstance(node, Decreasing):
        return Increasing()
    if isinstance(node, Increasing):
        return Decreasing()
    if isinstance(node, Maximiser):
        return Maximiser(perm_complement(node.pattern))
    if isinstance(node, Grid):
        k = len(node.rows)
        return Grid(tuple(reversed(node.rows)), node.cols,
                    tuple(Cell(k - 1 - c.row, c.col, complement(c.node)) for c in node.cells))
    return node


def _max132() -> Grid:
    # recursive part lower-left, decreasing top layer upper-right
    return Grid.inflate((1, 2), (U132, 1 - U132), (Recurse(), Decreasing()))


def _max1432() -> Grid:
    return Grid.inflate((1, 2), (KAPPA, 1 - KAPPA), (Recurse(), Decreasing()))


_MAXIMISERS = {
    (1, 3, 2): _max132,
    (2, 3, 1): lambda: reverse(_max132()),
    (3, 1, 2): lambda: complement(_max132()),
    (2, 1, 3): lambda: complement(reverse(_max132())),
    (1, 4, 3, 2): _max1432,
    (2, 3, 4, 1): lambda: reverse(_max1432()),
    (4, 1, 2, 3): lambda: complement(_max1432()),
    (3, 2, 1, 4): lambda: complement(reverse(_max1432())),
}


# --------------------------------------------------------------------- exact densities


class _Exact:
    def __init__(self):
        self.memo: dict = {}
        self.keep: list = []

    def density(self, s: Perm, node: Node, grid: Grid | None) -> float:
        if len(s) <= 1:
            return 1.0
        if isinstance(node, Decreasing):
            return 1.0 if all(a > b for a, b in zip(s, s[1:])) else 0.0
        if isinstance(node, Increasing):
            return 1.0 if all(a < b for a, b in zip(s, s[1:])) else 0.0
        if isinstance(node, Maximiser):
            node = self._expanded(node)
        if isinstance(node, Recurse):
            if grid is None:
                raise ValueError("Recurse outside of a grid")
            node = grid
        key = (s, id(node))
        if key not in self.memo:
            self.keep.append(node)
            self.memo[key] = self._grid(s, node)
        return self.memo[key]

    def _expanded(self, node: Maximiser) -> Grid:
        key = ("max", node.pattern)
        if key not in self.memo:
            self.memo[key] = node.expand()
        return self.memo[key]

    def _grid(self, s: Perm, g: Grid) -> float:
        m, k = len(s), len(g.cells)
        masses = g.masses
        rows = [c.row for c in g.cells]
        self_weight = 0.0
        total = 0.0
        # weakly increasing column choices for the points of s, left to right
        for cols in combinations_with_replacement(range(k), m):
            counts = [0] * k
            for c in cols:
                counts[c] += 1
            blocks = []
            start = 0
            for c in range(k):
                if counts[c]:
                    blocks.append((c, s[start:start + counts[c]]))
                    start += counts[c]
            # values of different cells must respect the row order of the cells
            ordered = sorted(blocks, key=lambda b: rows[b[0]])
            ok = all(max(a[1]) < min(b[1]) for a, b in zip(ordered, ordered[1:]))
            if not ok:
                continue
            weight = math.factorial(m)
            for c in range(k):
                if counts[c]:
                    weight *= masses[c] ** counts[c] / math.factorial(counts[c])
            if len(blocks) == 1 and isinstance(g.cells[blocks[0][0]].node, Recurse):
                self_weight += weight
                continue
            for c, vals in blocks:
                if weight == 0:
                    break
                weight *= self.density(standardize(vals), g.cells[c].node, g)
            total += weight
        return total / (1 - self_weight)


def density_exact(s: Perm, mu: Node, recursion_tol: float = 1e-15) -> float:
    """Probability that |s| points sampled from ``mu`` are order-isomorphic to ``s``.

    Self-similar grids are resolved exactly: the only term that refers back to
    the same (pattern, grid) pair is the one with every point in the Recurse
    cell, so the fixed point is a single division.  ``recursion_tol`` bounds
    the admissible contraction: a Recurse cell whose weight is within it of 1
    is rejected.
    """
    if recursion_tol <= 0:
        raise ValueError("recursion_tol must be positive")
    _check_contraction(mu, recursion_tol)
    return _Exact().density(tuple(s), mu, None)


def _check_contraction(node: Node, tol: float) -> None:
    if isinstance(node, Grid):
        for c in node.cells:
            if isinstance(c.node, Recurse) and node.cols[c.col] > 1 - tol:
                raise ValueError("Recurse cell must carry mass < 1")
            _check_contraction(c.node, tol)


# --------------------------------------------------------------------- sampling


def sample_points(mu: Node, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """``n`` i.i.d. points of ``mu`` in the unit square."""
    return _sample(mu, n, rng, None)


def sample_permutation(mu: Node, n: int, seed: int = 0) -> Perm:
    """The permutation induced by ``n`` random points of ``mu``."""
    x, y = sample_points(mu, n, np.random.default_rng(seed))
    ys = y[np.argsort(x, kind="stable")]
    return tuple(int(r) + 1 for r in np.argsort(np.argsort(ys, kind="stable"), kind="stable"))


def _sample(node: Node, n: int, rng, grid):
    if n == 0:
        return np.empty(0), np.empty(0)
    if isinstance(node, Decreasing):
        u = rng.random(n)
        return u, 1 - u
    if isinstance(node, Increasing):
        u = rng.random(n)
        return u, u.copy()
    if isinstance(node, Maximiser):
        node = node.expand()
    if isinstance(node, Recurse):
        node = grid
    masses = np.array(node.masses, dtype=float)
    which = rng.choice(len(masses), size=n, p=masses / masses.sum())
    x = np.empty(n)
    y = np.empty(n)
    col_start = np.concatenate([[0.0], np.cumsum(np.array(node.cols, dtype=float))])
    row_start = np.concatenate([[0.0], np.cumsum(np.array(node.rows, dtype=float))])
    for ci, cell in enumerate(node.cells):
        idx = np.nonzero(which == ci)[0]
        if idx.size == 0:
            continue
        cx, cy = _sample(cell.node, idx.size, rng, node)
        w = float(node.cols[cell.col])
        x[idx] = col_start[cell.col] + w * cx
        y[idx] = row_start[cell.row] + w * cy
    return x, y


def density_mc(s: Perm, mu: Node, samples: int, seed: int = 0,
               chunk: int = 200_000) -> tuple[float, float]:
    """Monte-Carlo estimate of p(s, mu) and its binomial standard error.

    Chunk ``i`` draws from a generator seeded by ``(seed, i)``, so results do
    not depend on how chunks are scheduled.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    s = tuple(s)
    m = len(s)
    target = np.array(s) - 1
    hits = 0
    done = 0
    i = 0
    while done < samples:
        n = min(chunk, samples - done)
        rng = np.random.default_rng([seed, i])
        x, y = sample_points(mu, n * m, rng)
        x = x.reshape(n, m)
        y = y.reshape(n, m)
        order = np.argsort(x, axis=1)
        ys = np.take_along_axis(y, order, axis=1)
        ranks = np.argsort(np.argsort(ys, axis=1), axis=1)
        hits += int(np.all(ranks == target, axis=1).sum())
        done += n
        i += 1
    p = hits / samples
    return p, math.sqrt(p * (1 - p) / samples)


# --------------------------------------------------------------------- JSON DSL


def to_dict(node: Node) -> dict:
    if isinstance(node, Decreasing):
        return {"kind": "dec"}
    if isinstance(node, Increasing):
        return {"kind": "inc"}
    if isinstance(node, Recurse):
        return {"kind": "recurse"}
    if isinstance(node, Maximiser):
        return {"kind": "max", "pattern": format_perm(node.pattern)}
    return {"kind": "grid", "rows": [_mass_out(m) for m in node.rows],
            "cols": [_mass_out(m) for m in node.cols],
            "cells": [{"r": c.row, "c": c.col, "node": to_dict(c.node)} for c in node.cells]}


def from_dict(data: dict) -> Node:
    kind = data.get("kind")
    if kind == "dec":
        return Decreasing()
    if kind == "inc":
        return Increasing()
    if kind == "recurse":
        return Recurse()
    if kind == "max":
        return Maximiser(parse_perm(data["pattern"]))
    if kind == "grid":
        return Grid(tuple(_mass_in(m) for m in data["rows"]), tuple(_mass_in(m) for m in data["cols"]),
                    tuple(Cell(int(c["r"]), int(c["c"]), from_dict(c["node"])) for c in data["cells"]))
    raise ValueError(f"unknown permuton node kind {kind!r}")


def _mass_out(m):
    return f"{m.numerator}/{m.denominator}" if isinstance(m, Fraction) else float(m)


def _mass_in(m):
    return Fraction(m) if isinstance(m, str) else float(m)


def dumps(node: Node) -> str:
    return json.dumps(to_dict(node), indent=1)


def loads(text: str) -> Node:
    return from_dict(json.loads(text))
