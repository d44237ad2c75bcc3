"""Types, flags, flag densities and flag-product coefficient tables."""
from __future__ import annotations

import hashlib
import logging
import os
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from math import comb
from pathlib import Path
from typing import Sequence

from .perm import (EMPTY, ForbiddenSet, Perm, enumerate_perms, format_perm,
                   parse_perm, standardize, subpattern)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Flag:
    """A permutation ``base`` with a distinguished root at ``support`` (0-based positions)."""

    base: Perm
    support: tuple[int, ...]

    def __post_init__(self):
        sup = tuple(self.support)
        if any(b <= a for a, b in zip(sup, sup[1:])):
            raise ValueError(f"support {sup} must be strictly increasing")
        if sup and (sup[0] < 0 or sup[-1] >= len(self.base)):
            raise ValueError(f"support {sup} out of range for a base of length {len(self.base)}")
        object.__setattr__(self, "support", sup)

    @property
    def tau(self) -> Perm:
        return subpattern(self.base, self.support)

    @property
    def m(self) -> int:
        return len(self.base)

    @property
    def t(self) -> int:
        return len(self.support)

    def __str__(self):
        return f"{format_perm(self.base)}@{','.join(str(i + 1) for i in self.support)}"


def enumerate_types(t: int, forbidden: ForbiddenSet = EMPTY) -> list[Perm]:
    return enumerate_perms(t, forbidden)


def enumerate_flags(m: int, tau: Perm, forbidden: ForbiddenSet = EMPTY) -> list[Flag]:
    """Admissible ``tau``-flags of length ``m``, ordered by (base, support)."""
    t = len(tau)
    if m < t:
        raise ValueError(f"flag length {m} shorter than type length {t}")
    out = []
    for base in enumerate_perms(m, forbidden):
        for sup in combinations(range(m), t):
            if subpattern(base, sup) == tau:
                out.append(Flag(base, sup))
    return out


def _induced_flag(p: Perm, positions: Sequence[int], root: Sequence[int]) -> Flag:
    """Flag induced on sorted ``positions`` of ``p`` with root positions ``root`` (a subset)."""
    base = standardize([p[i] for i in positions])
    where = {pos: k for k, pos in enumerate(positions)}
    return Flag(base, tuple(where[r] for r in root))


def _check_same_type(*flags: Flag) -> None:
    taus = {f.tau for f in flags}
    if len(taus) != 1:
        raise ValueError(f"flags have different types: {sorted(taus)}")
    sups = {f.t for f in flags}
    if len(sups) != 1:
        raise ValueError("flags have different type lengths")


def flag_density(s: Flag, p: Flag) -> Fraction:
    """Fraction of (m-t)-sets of non-root positions of ``p`` that, with the root, induce ``s``."""
    _check_same_type(s, p)
    n, m, t = p.m, s.m, s.t
    if m > n:
        raise ValueError("small flag longer than large flag")
    free = [i for i in range(n) if i not in p.support]
    hits = 0
    total = 0
    for extra in combinations(free, m - t):
        pos = sorted(p.support + extra)
        total += 1
        if _induced_flag(p.base, pos, p.support) == s:
            hits += 1
    return Fraction(hits, total)


def joint_density(s1: Flag, s2: Flag, p: Flag) -> Fraction:
    """Probability that root-sharing, otherwise disjoint random sets induce ``s1`` and ``s2``."""
    _check_same_type(s1, s2, p)
    n, t = p.m, p.t
    m1, m2 = s1.m, s2.m
    if m1 + m2 - t > n:
        raise ValueError(f"need |p| >= {m1 + m2 - t}, got {n}")
    free = [i for i in range(n) if i not in p.support]
    hits = 0
    for e1 in combinations(free, m1 - t):
        if _induced_flag(p.base, sorted(p.support + e1), p.support) != s1:
            continue
        rest = [i for i in free if i not in e1]
        for e2 in combinations(rest, m2 - t):
            if _induced_flag(p.base, sorted(p.support + e2), p.support) == s2:
                hits += 1
    return Fraction(hits, comb(n - t, m1 - t) * comb(n - m1, m2 - t))


def admissible_pairs(N: int) -> list[tuple[int, int]]:
    """All (t, m) with 0 <= t < m and 2m - t = N."""
    if N < 1:
        raise ValueError("N must be positive")
    return [(t, (N + t) // 2) for t in range(N % 2, N, 2) if t < (N + t) // 2]


@dataclass
class FlagProductTable:
    """Root-averaged joint densities of flag pairs in every admissible target.

    ``counts[pi]`` lists ``(i, j, c)`` with ``i <= j``; the coefficient of the
    ordered pair (i, j) in target ``pi`` is ``c / denominator``, and the
    coefficient of (j, i) is the same number.
    """

    N: int
    tau: Perm
    m: int
    forbidden: ForbiddenSet
    flags: list[Flag]
    denominator: int
    counts: list[list[tuple[int, int, int]]] = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.flags)

    def coefficient(self, pi: int, i: int, j: int) -> Fraction:
        if i > j:
            i, j = j, i
        for a, b, c in self.counts[pi]:
            if a == i and b == j:
                return Fraction(c, self.denominator)
        return Fraction(0)

    def matrix(self, pi: int) -> list[list[Fraction]]:
        ell = self.size
        out = [[Fraction(0)] * ell for _ in range(ell)]
        for i, j, c in self.counts[pi]:
            out[i][j] = out[j][i] = Fraction(c, self.denominator)
        return out

    def to_text(self) -> str:
        forb = ",".join(self.forbidden.strings()) or "-"
        lines = [f"N {self.N}", f"type {format_perm(self.tau) or '-'}", f"m {self.m}",
                 f"forbidden {forb}", f"flags {self.size}"]
        for f in self.flags:
            lines.append(f"flag {format_perm(f.base)} {' '.join(str(i + 1) for i in f.support)}".rstrip())
        for pi, row in enumerate(self.counts):
            for i, j, c in row:
                q = Fraction(c, self.denominator)
                lines.append(f"{pi} {i} {j} {q.numerator}/{q.denominator}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "FlagProductTable":
        lines = text.splitlines()
        head = dict(line.split(" ", 1) for line in lines[:5])
        N, m, ell = int(head["N"]), int(head["m"]), int(head["flags"])
        tau = () if head["type"] == "-" else parse_perm(head["type"])
        forb = ForbiddenSet(()) if head["forbidden"] == "-" else ForbiddenSet.of(*head["forbidden"].split(","))
        flags = []
        for line in lines[5:5 + ell]:
            parts = line.split()
            flags.append(Flag(parse_perm(parts[1]), tuple(int(x) - 1 for x in parts[2:])))
        raw = []
        for line in lines[5 + ell:]:
            pi, i, j, q = line.split()
            raw.append((int(pi), int(i), int(j), Fraction(q)))
        den = comb(N, len(tau)) * comb(N - len(tau), m - len(tau))
        n_targets = len(enumerate_perms(N, forb))
        counts: list[list[tuple[int, int, int]]] = [[] for _ in range(n_targets)]
        for pi, i, j, q in raw:
            counts[pi].append((i, j, int(q * den)))
        return cls(N, tau, m, forb, flags, den, counts)


def _target_counts(args) -> list[tuple[int, int, int]]:
    p, tau, m, index = args
    N, t = len(p), len(tau)
    tally: dict[tuple[int, int], int] = defaultdict(int)
    for root in combinations(range(N), t):
        if subpattern(p, root) != tau:
            continue
        free = [i for i in range(N) if i not in root]
        for e1 in combinations(free, m - t):
            e2 = tuple(i for i in free if i not in e1)
            f1 = index[_induced_flag(p, sorted(root + e1), root)]
            f2 = index[_induced_flag(p, sorted(root + e2), root)]
            if f1 <= f2:
                tally[f1, f2] += 1
    return sorted((i, j, c) for (i, j), c in tally.items())


def _cache_dir() -> Path:
    return Path(os.environ.get("PERMFLAG_CACHE", Path.home() / ".cache" / "permflag"))


def _cache_key(N: int, tau: Perm, m: int, forbidden: ForbiddenSet) -> str:
    raw = f"{N}|{format_perm(tau)}|{m}|{','.join(forbidden.strings())}|v1"
    return hashlib.sha256(raw.encode()).hexdigest()[:24]


def build_product_table(N: int, tau: Perm, m: int, forbidden: ForbiddenSet = EMPTY, *,
                        use_cache: bool = False, workers: int = 1) -> FlagProductTable:
    """Coefficients (1/C(N,t)) * sum over root sets of joint densities, for every target.

    Root sets whose induced pattern is not ``tau`` contribute zero but still
    count in the C(N, t) normalisation.
    """
    t = len(tau)
    if N != 2 * m - t:
        raise ValueError(f"N={N} must equal 2m - t = {2 * m - t}")
    if use_cache:
        path = _cache_dir() / f"table_{_cache_key(N, tau, m, forbidden)}.txt"
        if path.exists():
            return FlagProductTable.from_text(path.read_text())
    flags = enumerate_flags(m, tau, forbidden)
    index = {f: i for i, f in enumerate(flags)}
    targets = enumerate_perms(N, forbidden)
    jobs = [(p, tau, m, index) for p in targets]
    if workers > 1 and len(targets) > 200:
        with ProcessPoolExecutor(workers) as ex:
            counts = list(ex.map(_target_counts, jobs, chunksize=64))
    else:
        counts = [_target_counts(job) for job in jobs]
    # swapping the two halves of a split is a bijection, so the (i, j) and
    # (j, i) counts agree and recording i <= j loses nothing
    den = comb(N, t) * comb(N - t, m - t)
    table = FlagProductTable(N, tau, m, forbidden, flags, den, counts)
    if use_cache:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(table.to_text())
        log.info("cached table %s", path)
    return table
