import itertools

import numpy as np
import pytest

from permflag.constructions import (PI_WEIGHTS, PRESETS, TABLE3, batkeyev, batkeyev_product,
                                    batkeyev_series, beta_21354, eval_batkeyev, eval_gamma_1324,
                                    eval_pi_1342, gamma_1324, optimize_gamma_1324, pi_1342, preset,
                                    table3_preset)
from permflag.permuton import GAMMA, Decreasing, Grid, density_exact, density_mc


def test_gamma_optimum():
    value, a, c = optimize_gamma_1324()
    assert value > 0.244054321
    assert 0 < a <= 0.25 and 0 < c <= 0.5


@pytest.mark.parametrize("a, c", list(itertools.product([0.02, 0.1, 0.2], [0.1, 0.3, 0.45])))
def test_gamma_closed_form_matches_permuton(a, c):
    if 1 - c - 2 * a <= 0:
        pytest.skip("empty B layers")
    exact = density_exact((1, 3, 2, 4), gamma_1324(a, c))
    assert eval_gamma_1324(a, c) == pytest.approx(exact, abs=1e-9)


def test_gamma_degenerate_three_layers():
    layers = Grid.inflate((1, 2, 3), (0.25, 0.5, 0.25), (Decreasing(),) * 3)
    assert eval_gamma_1324(0, 0.5) == pytest.approx(density_exact((1, 3, 2, 4), layers))
    assert eval_gamma_1324(0, 0.5) == pytest.approx(0.1875)
    with pytest.raises(ValueError):
        gamma_1324(0.3, 0.5)


def test_batkeyev():
    assert density_exact((1, 3, 4, 2), batkeyev()) == pytest.approx(0.1965796, abs=1e-6)
    assert batkeyev_series() == pytest.approx(batkeyev_product(), abs=1e-12)
    assert batkeyev_product() == pytest.approx(GAMMA, abs=1e-12)


def test_batkeyev_mc():
    est, err = density_mc((1, 3, 4, 2), batkeyev(), 300_000, seed=2)
    assert abs(est - GAMMA) <= 3 * err


def test_pi():
    assert eval_pi_1342() > 0.198836597
    assert eval_pi_1342([1 / 7] * 7) < eval_pi_1342()
    with pytest.raises(ValueError):
        pi_1342([0.5, 0.5])


def test_pi_weights_are_normalised_internally():
    scaled = [3 * w for w in PI_WEIGHTS]
    assert eval_pi_1342(scaled) == pytest.approx(eval_pi_1342(), abs=1e-15)


def test_beta_21354_root():
    b = beta_21354()
    assert 40 * b ** 3 - 32 * b ** 2 + 9 * b - 1 == pytest.approx(0, abs=1e-14)
    assert 0 < b < 0.5


@pytest.mark.parametrize("name", [n for n, p in PRESETS.items() if p.closed_form])
def test_preset_closed_forms(name):
    _, _, value = preset(name)
    assert value == pytest.approx(PRESETS[name].closed_form(), abs=1e-12)


def test_unknown_preset():
    with pytest.raises(KeyError):
        preset("nope")


def test_eval_batkeyev_matches_series_and_permuton():
    assert eval_batkeyev() == pytest.approx(batkeyev_series(), abs=1e-15)
    assert eval_batkeyev() == pytest.approx(density_exact((1, 3, 4, 2), batkeyev()), abs=1e-12)


@pytest.mark.parametrize("a, c", [(0.3, 0.3), (0.1, 0.0), (0.1, 0.6), (-0.01, 0.4)])
def test_eval_gamma_rejects_outside_domain(a, c):
    with pytest.raises(ValueError):
        eval_gamma_1324(a, c)


def test_table3_closed_forms_match_permutons():
    for name in TABLE3:
        mu, value = table3_preset(name)
        assert value == pytest.approx(density_exact(PRESETS[name].pattern, mu), abs=1e-12)
    with pytest.raises(KeyError):
        table3_preset("1324")
