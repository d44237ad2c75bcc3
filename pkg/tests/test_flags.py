import random
from fractions import Fraction
from itertools import combinations
from math import comb

import pytest

from permflag.flags import (Flag, FlagProductTable, admissible_pairs, build_product_table,
                            enumerate_flags, enumerate_types, flag_density, joint_density)
from permflag.perm import EMPTY, ForbiddenSet, enumerate_perms, parse_perm, subpattern


def F(base, *support):
    return Flag(parse_perm(base), tuple(support))


def test_enumerate_types():
    assert enumerate_types(1) == [(1,)]
    assert len(enumerate_types(3)) == 6
    assert enumerate_types(2, ForbiddenSet.of("12")) == [(2, 1)]


def test_enumerate_flags():
    flags = enumerate_flags(2, (1,))
    assert [str(f) for f in flags] == ["12@1", "12@2", "21@1", "21@2"]
    assert len(enumerate_flags(3, (1,))) == 18
    # m = t: one full-support flag per base isomorphic to tau
    assert enumerate_flags(2, (2, 1)) == [F("21", 0, 1)]


def test_flags_respect_forbidden():
    flags = enumerate_flags(3, (1,), ForbiddenSet.of("123"))
    assert len(flags) == 15
    assert all(f.base != (1, 2, 3) for f in flags)


def test_flag_validation():
    with pytest.raises(ValueError):
        Flag((1, 2), (2,))
    with pytest.raises(ValueError):
        Flag((1, 2), (1, 0))


def test_flag_density_examples():
    assert flag_density(F("12", 0), F("123", 0)) == 1
    assert flag_density(F("12", 1), F("123", 0)) == 0
    assert flag_density(F("12", 1), F("123", 1)) == Fraction(1, 2)


def test_flag_density_type_mismatch():
    with pytest.raises(ValueError):
        flag_density(F("12", 0), F("213", 0, 1))
    with pytest.raises(ValueError):
        flag_density(F("123", 0), F("12", 0))


def test_joint_density_examples():
    full = F("1", 0)
    assert joint_density(full, full, F("132", 1)) == 1
    # in 132 rooted at the 3: one of the two assignments of {1, 2} works
    assert joint_density(F("12", 1), F("21", 0), F("132", 1)) == Fraction(1, 2)
    with pytest.raises(ValueError):
        joint_density(F("12", 0), F("12", 0), F("12", 0))


@pytest.mark.parametrize("p, root", [("132", (1,)), ("25314", (2,)), ("2413", (0, 3))])
def test_joint_density_partition(p, root):
    p = parse_perm(p)
    tau = subpattern(p, root)
    t = len(tau)
    for m1 in range(t, len(p) + 1):
        for m2 in range(t, len(p) + t - m1 + 1):
            total = sum(joint_density(a, b, Flag(p, root))
                        for a in enumerate_flags(m1, tau) for b in enumerate_flags(m2, tau))
            assert total == 1


def test_admissible_pairs():
    assert admissible_pairs(3) == [(1, 2)]
    assert admissible_pairs(7) == [(1, 4), (3, 5), (5, 6)]
    assert admissible_pairs(2) == [(0, 1)]
    assert admissible_pairs(6) == [(0, 3), (2, 4), (4, 5)]


def brute_coefficient(P, tau, fi, fj):
    """Average over t-subsets of P of the joint density, zero when the subset is not tau."""
    N, t = len(P), len(tau)
    total = Fraction(0)
    for root in combinations(range(N), t):
        if subpattern(P, root) == tau:
            total += joint_density(fi, fj, Flag(P, root))
    return total / comb(N, t)


def test_coefficient_231():
    table = build_product_table(3, (1,), 2)
    pi = enumerate_perms(3).index((2, 3, 1))
    i, j = table.flags.index(F("12", 0)), table.flags.index(F("21", 0))
    assert table.coefficient(pi, i, j) == Fraction(1, 6)
    assert brute_coefficient((2, 3, 1), (1,), table.flags[i], table.flags[j]) == Fraction(1, 6)
    assert table.coefficient(pi, j, i) == table.coefficient(pi, i, j)


@pytest.mark.parametrize("N", [2, 3, 4, 5])
def test_table_matches_brute_force(N):
    for t, m in admissible_pairs(N):
        for tau in enumerate_types(t):
            table = build_product_table(N, tau, m)
            for pi, P in enumerate(enumerate_perms(N)):
                M = table.matrix(pi)
                for i, fi in enumerate(table.flags):
                    for j, fj in enumerate(table.flags):
                        assert M[i][j] == brute_coefficient(P, tau, fi, fj)


@pytest.mark.parametrize("N", [3, 4, 5, 6])
def test_table_rows_sum_to_type_density(N):
    for t, m in admissible_pairs(N):
        for tau in enumerate_types(t):
            table = build_product_table(N, tau, m)
            for pi, P in enumerate(enumerate_perms(N)):
                total = sum(sum(row) for row in table.matrix(pi))
                roots = sum(subpattern(P, r) == tau for r in combinations(range(N), t))
                assert total == Fraction(roots, comb(N, t))


def test_table_with_forbidden_drops_flags_and_targets():
    forb = ForbiddenSet.of("2431")
    table = build_product_table(6, (1, 2), 4, forb)
    assert all(forb.admits(f.base) for f in table.flags)
    assert len(table.counts) == len(enumerate_perms(6, forb))


def test_table_text_round_trip():
    table = build_product_table(5, (2, 1, 3), 4, ForbiddenSet.of("2431"))
    again = FlagProductTable.from_text(table.to_text())
    assert again == table


def test_cache_hits_are_identical(tmp_path, monkeypatch):
    monkeypatch.setenv("PERMFLAG_CACHE", str(tmp_path))
    first = build_product_table(4, (1, 2), 3, EMPTY, use_cache=True)
    assert list(tmp_path.iterdir())
    second = build_product_table(4, (1, 2), 3, EMPTY, use_cache=True)
    assert first == second


def test_parallel_build_matches_serial():
    a = build_product_table(6, (1, 2), 4, workers=1)
    b = build_product_table(6, (1, 2), 4, workers=2)
    assert a == b


def prop1_gaps(n, trials=40, seed=0):
    rng = random.Random(seed)
    s1, s2 = F("12", 0), F("21", 0)
    gaps = []
    for _ in range(trials):
        base = tuple(rng.sample(range(1, n + 1), n))
        p = Flag(base, (rng.randrange(n),))
        gaps.append(abs(flag_density(s1, p) * flag_density(s2, p) - joint_density(s1, s2, p)))
    return gaps


def test_prop1_gap_decays():
    worst = {n: max(prop1_gaps(n)) for n in range(3, 10)}
    assert all(n * g <= 1 for n, g in worst.items())
    assert worst[9] < worst[3]
