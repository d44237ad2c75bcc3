"""Explicit lower-bound constructions and their closed-form densities."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq, minimize, minimize_scalar

from .perm import Perm
from .permuton import (BETA, GAMMA, KAPPA, LAMBDA, SQRT3, Decreasing, Grid, Increasing,
                       Maximiser, Node, Recurse, density_exact)

# ----------------------------------------------------------------- 1324: Gamma


def eval_gamma_1324(a: float, c: float) -> float:
    """24 (N1 + 2 N2 + 2 N3 + 2 N4) for the five-part construction, with b = (1 - c - 2a)/2.

    N1: the middle pair in C; N2: the middle pair in B; N3: three points in the
    top tail; N4: all four in the top tail.  Mirror images give the factor 2.
    """
    b = (1 - c - 2 * a) / 2
    if not (0 <= a <= 0.25 and 0 < c <= 0.5 and b >= 0):
        raise ValueError(f"need 0 <= a <= 1/4, 0 < c <= 1/2, b >= 0; got a={a}, c={c}, b={b}")
    n1 = c ** 2 / 2 * (a + b) ** 2
    n2 = b ** 2 / 2 * a * (a + b + c)
    n3 = LAMBDA * a ** 3 / 6 * (a + 2 * b + c)
    n4 = SQRT3 * LAMBDA * a ** 4 / (6 * ((SQRT3 + 1) ** 4 - 1))
    return 24 * (n1 + 2 * n2 + 2 * n3 + 2 * n4)


def gamma_1324(a: float, c: float) -> Grid:
    """A' + B' + C + B + A with a 132-maximiser bottom left and a 213-maximiser top right."""
    b = (1 - c - 2 * a) / 2
    if not (a > 0 and c > 0 and b > 0):
        raise ValueError(f"need a, b, c > 0, got a={a}, b={b}, c={c}")
    return Grid.inflate((1, 2, 3, 4, 5), (a, b, c, b, a),
                        (Maximiser((1, 3, 2)), Decreasing(), Decreasing(), Decreasing(),
                         Maximiser((2, 1, 3))))


def optimize_gamma_1324() -> tuple[float, float, float]:
    """Maximise the closed form over 0 < a <= 1/4, 0 < c <= 1/2.  Returns (value, a, c)."""
    def neg(z):
        a, c = z
        if a <= 0 or c <= 0 or a > 0.25 or c > 0.5 or 1 - c - 2 * a <= 0:
            return 1.0
        return -eval_gamma_1324(a, c)

    best = None
    for a0 in np.linspace(0.05, 0.2, 4):
        for c0 in np.linspace(0.2, 0.45, 4):
            res = minimize(neg, [a0, c0], method="Nelder-Mead",
                           options={"xatol": 1e-13, "fatol": 1e-16, "maxiter": 20_000})
            if best is None or res.fun < best.fun:
                best = res
    a, c = best.x
    return float(-best.fun), float(a), float(c)


# ----------------------------------------------------------------- 1342


def batkeyev() -> Grid:
    """Each layer of the 1432-maximiser replaced by a 231-maximiser, iterated bottom left."""
    return Grid.inflate((1, 2), (KAPPA, 1 - KAPPA), (Recurse(), Maximiser((2, 3, 1))))


def batkeyev_series(terms: int = 200) -> float:
    """(8 sqrt3 - 12) * sum_n (1 - kappa)^3 kappa^(4n + 1)."""
    return (8 * SQRT3 - 12) * sum((1 - KAPPA) ** 3 * KAPPA ** (4 * n + 1) for n in range(terms))


def eval_batkeyev() -> float:
    """p(1342) of the construction, summed in closed form: (8 sqrt3 - 12)(1 - kappa)^3 kappa / (1 - kappa^4)."""
    return (8 * SQRT3 - 12) * (1 - KAPPA) ** 3 * KAPPA / (1 - KAPPA ** 4)


def batkeyev_product() -> float:
    """p(132) p(1432) in radicals."""
    c = (math.sqrt(2) - 1) ** (1 / 3)
    return 2 * (2 * SQRT3 - 3) * (3 * c - 3 / c + 2)


PI_WEIGHTS = (
    0.2174127723536347308692444843,
    0.0170598057899242722740620549,
    0.0516101402487892270230230972,
    0.4340722809873864994312953007,
    0.1479895625950390496250611829,
    0.0764457255805656971383351365,
    0.0554097124446605236389787433,
)

# columns left to right; rows bottom to top read a1, a7, a2, a6, a3, a5, a4
PI_PATTERN: Perm = (1, 3, 5, 7, 6, 4, 2)


def pi_1342(weights=PI_WEIGHTS) -> Grid:
    """Seven parts: the iterated copy bottom left, increasing segments, a 231-maximiser last."""
    w = np.asarray(weights, dtype=float)
    if w.shape != (7,) or (w <= 0).any():
        raise ValueError("need seven positive weights")
    w = w / w.sum()
    children = (Recurse(),) + (Increasing(),) * 5 + (Maximiser((2, 3, 1)),)
    return Grid.inflate(PI_PATTERN, tuple(w), children)


def eval_pi_1342(weights=PI_WEIGHTS) -> float:
    return float(density_exact((1, 3, 4, 2), pi_1342(weights)))


# ----------------------------------------------------------------- other small patterns


def _alpha_14523_density(alpha: float) -> float:
    # one point in the iterated part, 4523 in the top part; geometric sum over levels
    return 15 / 8 * (1 - alpha) * alpha ** 4 / (1 - (1 - alpha) ** 5)


def construction_14523(alpha: float | None = None) -> Grid:
    """Iterated copy bottom left, a skew sum of two increasing halves on top."""
    if alpha is None:
        alpha = minimize_scalar(lambda x: -_alpha_14523_density(x), bounds=(0.5, 0.99),
                                method="bounded", options={"xatol": 1e-12}).x
        alpha = float(alpha)
    top = Grid.inflate((2, 1), (0.5, 0.5), (Increasing(), Increasing()))
    return Grid.inflate((1, 2), (1 - alpha, alpha), (Recurse(), top))


def beta_21354() -> float:
    return brentq(lambda x: 40 * x ** 3 - 32 * x ** 2 + 9 * x - 1, 0.3, 0.5, xtol=1e-15)


def construction_21354() -> Grid:
    b = beta_21354()
    return Grid.inflate((1, 2, 3, 4), (b, 0.5 - b, 0.5 - b, b), (Decreasing(),) * 4)


def _sum2(lo: Node, hi: Node, w_lo: float) -> Grid:
    return Grid.inflate((1, 2), (w_lo, 1 - w_lo), (lo, hi))


@dataclass(frozen=True)
class Preset:
    name: str
    pattern: Perm
    build: Callable[[], Node]
    closed_form: Callable[[], float] | None = None
    description: str = ""


def _presets() -> dict[str, Preset]:
    m231, m312 = Maximiser((2, 3, 1)), Maximiser((3, 1, 2))
    items = [
        Preset("gamma1324", (1, 3, 2, 4),
               lambda: gamma_1324(*optimize_gamma_1324()[1:]),
               lambda: optimize_gamma_1324()[0],
               "five-part layered construction with maximiser tails"),
        Preset("batkeyev", (1, 3, 4, 2), batkeyev, lambda: GAMMA,
               "231-maximiser layers in 1432-maximiser ratios"),
        Preset("pi1342", (1, 3, 4, 2), pi_1342, None, "seven-part construction"),
        Preset("132", (1, 3, 2), lambda: Maximiser((1, 3, 2)), lambda: LAMBDA),
        Preset("1432", (1, 4, 3, 2), lambda: Maximiser((1, 4, 3, 2)), lambda: BETA),
        Preset("23154", (2, 3, 1, 5, 4), lambda: _sum2(m231, Decreasing(), 3 / 5),
               lambda: math.factorial(5) * (2 / 5) ** 2 / 2 * (3 / 5) ** 3 / 6 * LAMBDA),
        Preset("14523", (1, 4, 5, 2, 3), construction_14523, None),
        Preset("21354", (2, 1, 3, 5, 4), construction_21354, None),
        Preset("231654", (2, 3, 1, 6, 5, 4), lambda: _sum2(m231, Decreasing(), 1 / 2),
               lambda: math.factorial(6) * 0.5 ** 6 / 36 * LAMBDA),
        Preset("231564", (2, 3, 1, 5, 6, 4), lambda: _sum2(m231, m231, 1 / 2),
               lambda: LAMBDA ** 2 * math.factorial(6) / 48 ** 2),
        Preset("231645", (2, 3, 1, 6, 4, 5), lambda: _sum2(m231, m312, 1 / 2),
               lambda: LAMBDA ** 2 * math.factorial(6) / 48 ** 2),
        Preset("215634", (2, 1, 5, 6, 3, 4),
               lambda: Grid.inflate((1, 3, 2), (1 / 3,) * 3,
                                    (Decreasing(), Increasing(), Increasing())),
               lambda: math.factorial(6) / (9 ** 3 * 2 ** 3)),
    ]
    return {p.name: p for p in items}


PRESETS = _presets()


def preset(name: str) -> tuple[Perm, Node, float]:
    """(pattern, permuton, exact density) for a named construction."""
    try:
        p = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
    mu = p.build()
    return p.pattern, mu, float(density_exact(p.pattern, mu))


TABLE3 = ("23154", "14523", "21354", "231654", "231564", "231645", "215634")


def table3_preset(name: str) -> tuple[Node, float]:
    """(permuton, value) for the small-pattern constructions; the closed form when one is known."""
    if name not in TABLE3:
        raise KeyError(f"unknown construction {name!r}; choose from {', '.join(TABLE3)}")
    p = PRESETS[name]
    mu = p.build()
    value = p.closed_form() if p.closed_form else float(density_exact(p.pattern, mu))
    return mu, float(value)
