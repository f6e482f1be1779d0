"""Independent reference computations used to freeze expected values.

Nothing here calls the closed forms under test: target integrals come from
adaptive 1-D quadrature and optimal two-point designs from brute force.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy import integrate
from scipy.stats import norm


def k1(x: float, z: float) -> float:
    return 1.0 + 0.5 * (abs(x) + abs(z) - abs(x - z))


def _expect(fn, kind: str, points=()) -> float:
    """E[fn(T)] for one coordinate of the target; ``points`` are kinks."""
    if kind == "uniform":
        brk = sorted({-1.0, 1.0, *[p for p in points if -1 < p < 1]})
        return sum(integrate.quad(fn, a, b, epsabs=1e-14, epsrel=1e-13)[0] for a, b in zip(brk, brk[1:])) / 2.0
    # arcsine: t = -cos(pi u), u uniform on [0, 1]
    brk = sorted({0.0, 1.0, *[math.acos(-p) / math.pi for p in points if -1 < p < 1]})
    g = lambda u: fn(-math.cos(math.pi * u))  # noqa: E731
    return sum(integrate.quad(g, a, b, epsabs=1e-14, epsrel=1e-13)[0] for a, b in zip(brk, brk[1:]))


def discrepancy_sq(points, weights, kind: str) -> float:
    """D^2 from numerically integrated 1-D kernel means (product structure)."""
    x = np.atleast_2d(np.asarray(points, dtype=float))
    w = np.asarray(weights, dtype=float)
    n, d = x.shape
    c1 = _expect(lambda s: _expect(lambda t: k1(s, t), kind, [s, 0.0]), kind, [0.0])
    mean = np.array([[_expect(lambda t: k1(x[i, j], t), kind, [x[i, j], 0.0]) for j in range(d)]
                     for i in range(n)])
    pair = sum(w[i] * w[k] * np.prod([k1(x[i, j], x[k, j]) for j in range(d)])
               for i in range(n) for k in range(n))
    return c1**d - 2.0 * float(w @ np.prod(mean, axis=1)) + pair


def glm_weight_ref(link: str, eta: float) -> float:
    if link == "logit":
        mu = 1.0 / (1.0 + math.exp(-eta))
        return mu * (1.0 - mu)
    if link == "probit":
        mu = norm.cdf(eta)
        return norm.pdf(eta) ** 2 / (mu * (1.0 - mu))
    return 1.0


def info_1d(link: str, beta, powers, kind: str) -> np.ndarray:
    """Target information for a 1-D polynomial model by adaptive quadrature."""
    l = len(powers)  # noqa: E741
    out = np.zeros((l, l))
    for a, b in itertools.product(range(l), repeat=2):
        f = lambda t: t ** (powers[a] + powers[b]) * glm_weight_ref(  # noqa: E731
            link, sum(bb * t**p for bb, p in zip(beta, powers)))
        out[a, b] = _expect(f, kind)
    return out


def two_point_a_opt(link: str, beta, grid) -> tuple[float, float, float, float]:
    """Best A-criterion over two-point designs on ``grid`` for basis [1, x].

    For fixed support the optimal weight is closed-form: with ``G = [a, b]``
    the criterion is ``c1 / w + c2 / (1 - w)`` where ``c`` are the squared
    row norms of ``G^{-1}``, minimised at ``w = sqrt(c1) / (sqrt(c1) + sqrt(c2))``.
    """
    best = (math.inf, 0.0, 0.0, 0.0)
    root = {float(x): math.sqrt(glm_weight_ref(link, beta[0] + beta[1] * x)) for x in grid}
    for x1, x2 in itertools.combinations(grid, 2):
        s1, s2 = root[float(x1)], root[float(x2)]
        g = np.array([[s1, s2], [s1 * x1, s2 * x2]])
        gi = np.linalg.inv(g)
        c1, c2 = float(gi[0] @ gi[0]), float(gi[1] @ gi[1])
        val = (math.sqrt(c1) + math.sqrt(c2)) ** 2
        if val < best[0]:
            best = (val, x1, x2, math.sqrt(c1) / (math.sqrt(c1) + math.sqrt(c2)))
    return best
