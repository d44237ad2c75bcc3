"""Layered permutons and layer-size optimisation over the simplex."""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .perm import Perm, layer_profile
from .permuton import Decreasing, Grid


def layered_density(s_layers: Sequence[int], x: Sequence[float]) -> float:
    """Density of the layered pattern with layer sizes ``s_layers`` in the layered permuton ``x``.

    ``x`` lists the permuton's layer masses bottom to top.  Pattern layers must
    land in distinct permuton layers, in increasing order.
    """
    s_layers = tuple(s_layers)
    ell = len(s_layers)
    dp = [1.0] + [0.0] * ell
    fact = [math.factorial(k) for k in s_layers]
    for w in x:
        for i in range(ell, 0, -1):
            dp[i] += dp[i - 1] * w ** s_layers[i - 1] / fact[i - 1]
    return math.factorial(sum(s_layers)) * dp[ell]


def layered_permuton(x: Sequence[float]) -> Grid:
    k = len(x)
    return Grid.inflate(tuple(range(1, k + 1)), tuple(x), (Decreasing(),) * k)


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1
    idx = np.arange(1, len(v) + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(v - theta, 0)


def _local_search(f, x0: np.ndarray, tol: float) -> tuple[float, np.ndarray]:
    res = minimize(lambda z: -f(project_simplex(z)), x0, method="Powell",
                   options={"xtol": tol, "ftol": tol, "maxfev": 200_000})
    x = project_simplex(res.x)
    return f(x), x


def price_optimize(s: Perm, max_layers: int, restarts: int = 21, seed: int = 0,
                   tol: float = 1e-12, stop_improvement: float = 1e-9):
    """Best layered-permuton density of ``s`` with up to ``max_layers`` layers.

    For each layer count the masses are optimised by multi-start Powell search
    on the simplex; starts are the previous optimum with a thin layer inserted
    in every gap, topped up with random Dirichlet points.  The loop stops once
    an extra layer improves the value by less than ``stop_improvement``.
    Returns ``(value, weights, layers_used)``; the value is attained by an
    explicit construction, so it is a lower bound on the packing density.
    """
    layers = layer_profile(s)
    if max_layers < len(layers):
        raise ValueError(f"need at least {len(layers)} layers for {s}")
    rng = np.random.default_rng(seed)

    def f(x):
        return layered_density(layers, x)

    best_val, best_x, used = -1.0, None, 0
    for m in range(len(layers), max_layers + 1):
        starts = []
        if best_x is None:
            starts.append(np.full(m, 1 / m))
        else:
            for gap in range(m):
                x0 = np.insert(best_x * (1 - 1e-3), gap, 1e-3)
                starts.append(x0)
        while len(starts) < restarts:
            starts.append(rng.dirichlet(np.ones(m)))
        val, x = max((_local_search(f, x0, tol) for x0 in starts[:max(restarts, 1)]),
                     key=lambda r: r[0])
        improved = val - best_val
        if val > best_val:
            best_val, best_x, used = val, x, m
        else:
            best_x = np.insert(best_x, 0, 0.0)
        if improved < stop_improvement:
            break
    return float(best_val), best_x, used
