"""Permutations, pattern containment and avoidance enumeration.

Permutations are plain tuples of ints in one-line notation over ``1..n``.
Positions in the Python API are 0-based; serialized forms (certificates,
CLI output) use the digit-string format from :func:`format_perm`.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import combinations, permutations
from math import comb
from typing import Iterable, Sequence

Perm = tuple[int, ...]

#: Layered permutations are exactly the class Av(231, 312).
LAYERED_BASIS: tuple[Perm, ...] = ((2, 3, 1), (3, 1, 2))


def is_perm(values: Sequence[int]) -> bool:
    return sorted(values) == list(range(1, len(values) + 1))


def perm(values: Iterable[int]) -> Perm:
    """Validate and freeze ``values`` as a permutation."""
    p = tuple(int(v) for v in values)
    if not is_perm(p):
        raise ValueError(f"not a permutation of 1..{len(p)}: {p}")
    return p


def parse_perm(text: str) -> Perm:
    """Parse ``"1324"`` or ``"10,1,2,..."``; the empty string is the empty permutation."""
    text = text.strip()
    if not text:
        return ()
    if "," in text:
        return perm(int(t) for t in text.split(","))
    if not text.isdigit():
        raise ValueError(f"cannot parse permutation {text!r}")
    return perm(int(c) for c in text)


def format_perm(p: Sequence[int]) -> str:
    if len(p) <= 9:
        return "".join(str(v) for v in p)
    return ",".join(str(v) for v in p)


def standardize(values: Sequence[int]) -> Perm:
    """Order-isomorphic permutation of a sequence of distinct numbers."""
    rank = {v: i + 1 for i, v in enumerate(sorted(values))}
    return tuple(rank[v] for v in values)


def subpattern(p: Perm, indices: Sequence[int]) -> Perm:
    """Standardization of the entries of ``p`` at the (0-based, increasing) ``indices``."""
    n = len(p)
    prev = -1
    for i in indices:
        if not 0 <= i < n:
            raise IndexError(f"position {i} out of range for length {n}")
        if i <= prev:
            raise ValueError("indices must be strictly increasing")
        prev = i
    return standardize([p[i] for i in indices])


@lru_cache(maxsize=1 << 18)
def count_occurrences(s: Perm, p: Perm) -> int:
    """Number of |s|-subsets of positions of ``p`` that induce ``s``."""
    m, n = len(s), len(p)
    if m > n:
        return 0
    if m == 0:
        return 1
    return sum(1 for idx in combinations(range(n), m)
               if standardize([p[i] for i in idx]) == s)


def contains(p: Perm, s: Perm) -> bool:
    m, n = len(s), len(p)
    if m > n:
        return False
    return any(standardize([p[i] for i in idx]) == s
               for idx in combinations(range(n), m))


def density(s: Perm, p: Perm) -> Fraction:
    """p(s, p): fraction of |s|-subsets of ``p`` order-isomorphic to ``s``; 0 if |p| < |s|."""
    m, n = len(s), len(p)
    if n < m:
        return Fraction(0)
    return Fraction(count_occurrences(s, p), comb(n, m))


@dataclass(frozen=True)
class ForbiddenSet:
    """Canonical set of forbidden patterns.

    Patterns contained in another member are redundant (avoiding the smaller
    one implies avoiding the larger) and the larger one is dropped.
    """

    patterns: tuple[Perm, ...] = ()

    def __post_init__(self):
        pats = sorted(set(perm(p) for p in self.patterns), key=lambda q: (len(q), q))
        kept: list[Perm] = []
        for q in pats:
            if not any(contains(q, r) for r in kept):
                kept.append(q)
        object.__setattr__(self, "patterns", tuple(kept))

    @classmethod
    def of(cls, *patterns: str | Sequence[int]) -> "ForbiddenSet":
        return cls(tuple(parse_perm(q) if isinstance(q, str) else tuple(q) for q in patterns))

    def admits(self, p: Perm) -> bool:
        return not any(contains(p, q) for q in self.patterns)

    def union(self, other: Iterable[Perm]) -> "ForbiddenSet":
        return ForbiddenSet(self.patterns + tuple(other))

    def strings(self) -> list[str]:
        return [format_perm(q) for q in self.patterns]

    def __bool__(self) -> bool:
        return bool(self.patterns)

    def __iter__(self):
        return iter(self.patterns)


EMPTY = ForbiddenSet()


@lru_cache(maxsize=None)
def _enumerate(n: int, forbidden: ForbiddenSet) -> tuple[Perm, ...]:
    if n == 0:
        return ((),)
    if not forbidden:
        return tuple(permutations(range(1, n + 1)))
    # Extend admissible (n-1)-perms by inserting the value n; avoidance is
    # hereditary so every admissible n-perm arises this way.
    out = set()
    for q in _enumerate(n - 1, forbidden):
        for pos in range(n):
            cand = q[:pos] + (n,) + q[pos:]
            if forbidden.admits(cand):
                out.add(cand)
    return tuple(sorted(out))


def enumerate_perms(n: int, forbidden: ForbiddenSet = EMPTY) -> list[Perm]:
    """All ``forbidden``-avoiding permutations of length ``n`` in lexicographic order."""
    if n < 0:
        raise ValueError("n must be non-negative")
    return list(_enumerate(n, forbidden))


def is_layered(p: Perm) -> bool:
    try:
        layer_profile(p)
    except ValueError:
        return False
    return True


def layer_profile(p: Perm) -> tuple[int, ...]:
    """Sizes of the decreasing layers of a layered permutation, left to right."""
    sizes = []
    i, n = 0, len(p)
    while i < n:
        # a layer starting at i must contain exactly the values i+1..top
        top = p[i]
        size = top - i
        if size < 1 or p[i:i + size] != tuple(range(top, i, -1)):
            raise ValueError(f"{format_perm(p)} is not layered")
        sizes.append(size)
        i += size
    return tuple(sizes)


def from_layers(sizes: Sequence[int]) -> Perm:
    out: list[int] = []
    base = 0
    for s in sizes:
        out.extend(range(base + s, base, -1))
        base += s
    return tuple(out)


def reverse(p: Perm) -> Perm:
    return tuple(reversed(p))


def complement(p: Perm) -> Perm:
    n = len(p)
    return tuple(n + 1 - v for v in p)


def inverse(p: Perm) -> Perm:
    inv = [0] * len(p)
    for i, v in enumerate(p):
        inv[v - 1] = i + 1
    return tuple(inv)
