"""Kernel discrepancy between an exact design and a uniform/arcsine target.

The kernel is the product over coordinates of ``1 + (|x| + |z| - |x - z|) / 2``
on [-1, 1]^d.  For both supported targets the one- and two-fold kernel
integrals are available in closed form, so the squared discrepancy reduces to
a constant, a single sum over design points and a double sum over pairs.
A Monte-Carlo estimator of the two target integrals is provided as an
independent check.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import Design, TargetDistribution, _as_points
from .errors import InvalidInput

NEG_TOL = 1e-10
MC_CHUNK = 8192

ARCSINE_CONST = 1.0 + 2.0 / math.pi - 4.0 / math.pi**2


@dataclass(frozen=True)
class DiscrepancyReport:
    d_squared: float
    d: float
    target: TargetDistribution
    method: str
    mc_std_error: float | None = None
    clamped: bool = False

    def to_json(self) -> dict:
        return {
            "d_squared": self.d_squared,
            "d": self.d,
            "target": self.target.kind,
            "dim": self.target.d,
            "method": self.method,
            "mc_std_error": self.mc_std_error,
            "clamped": self.clamped,
        }


def _check_domain(x: np.ndarray) -> None:
    if np.any(np.abs(x) > 1.0):
        raise InvalidInput("kernel arguments must lie in [-1, 1]^d")


def kernel_matrix(x, z) -> np.ndarray:
    """Gram matrix ``K(x_i, z_k)`` for ``(m, d)`` and ``(p, d)`` point arrays."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    z = np.atleast_2d(np.asarray(z, dtype=float))
    if x.shape[1] != z.shape[1]:
        raise InvalidInput(f"dimension mismatch: {x.shape[1]} vs {z.shape[1]}")
    _check_domain(x)
    _check_domain(z)
    out = np.ones((x.shape[0], z.shape[0]))
    for j in range(x.shape[1]):
        a, b = x[:, j, None], z[None, :, j]
        out *= 1.0 + 0.5 * (np.abs(a) + np.abs(b) - np.abs(a - b))
    return out


def kernel_eval(x, z) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if x.shape != z.shape or x.ndim != 1:
        raise InvalidInput(f"dimension mismatch: {x.shape} vs {z.shape}")
    return float(kernel_matrix(x[None, :], z[None, :])[0, 0])


def _uniform_factor(x: np.ndarray) -> np.ndarray:
    return 0.5 * (2.0 + np.abs(x) - 0.5 * x * x)


def _arcsine_factor(x: np.ndarray) -> np.ndarray:
    # sqrt argument clipped so that |x| == 1 gives the exact limit 0
    root = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    return 1.0 + 1.0 / math.pi + 0.5 * np.abs(x) - (x * np.arcsin(np.clip(x, -1.0, 1.0)) + root) / math.pi


def kernel_mean(x, target: TargetDistribution) -> np.ndarray:
    """``∫ K(x, t) dF_tar(t)`` for each row of ``x``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != target.d:
        raise InvalidInput(f"points have dimension {x.shape[1]}, target has {target.d}")
    _check_domain(x)
    factor = _uniform_factor if target.kind == "uniform" else _arcsine_factor
    return np.prod(factor(x), axis=1)


def kernel_mean_uniform(x) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return float(kernel_mean(x[None, :], TargetDistribution("uniform", x.size))[0])


def kernel_mean_arcsine(x) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return float(kernel_mean(x[None, :], TargetDistribution("arcsine", x.size))[0])


def kernel_double_mean(target: TargetDistribution) -> float:
    """``∫∫ K dF_tar dF_tar``."""
    base = 7.0 / 6.0 if target.kind == "uniform" else ARCSINE_CONST
    return base**target.d


def design_energy(design: Design, block: int = 1024) -> float:
    """``Σ_{i,k} w_i w_k K(x_i, x_k)`` with ``w_i = n_i / n``, evaluated exactly."""
    x, w = design.points, design.weights
    total = 0.0
    for start in range(0, len(x), block):
        kb = kernel_matrix(x[start:start + block], x)
        total += float(w[start:start + block] @ kb @ w)
    return total


def _report(d2: float, target, method, se=None) -> DiscrepancyReport:
    clamped = d2 < 0.0
    if d2 < -NEG_TOL:
        raise ArithmeticError(f"squared discrepancy {d2:.3e} is negative beyond rounding")
    d2 = max(d2, 0.0)
    return DiscrepancyReport(d2, math.sqrt(d2), target, method, se, clamped)


def _check_pair(design: Design, target: TargetDistribution) -> None:
    if not isinstance(target, TargetDistribution):
        raise InvalidInput("target must be a TargetDistribution")
    if design.d != target.d:
        raise InvalidInput(f"design dimension {design.d} does not match target dimension {target.d}")


def discrepancy_closed(design: Design, target: TargetDistribution) -> DiscrepancyReport:
    _check_pair(design, target)
    single = float(design.weights @ kernel_mean(design.points, target))
    d2 = kernel_double_mean(target) - 2.0 * single + design_energy(design)
    return _report(d2, target, "closed-form")


def _mc_chunk(points, weights, target, seed, chunk, size):
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chunk,)))
    t = target.sample(rng, size)
    s = target.sample(rng, size)
    paired = np.prod(1.0 + 0.5 * (np.abs(t) + np.abs(s) - np.abs(t - s)), axis=1)
    y = paired - 2.0 * (kernel_matrix(t, points) @ weights)
    return float(y.sum()), float((y * y).sum())


def discrepancy_mc(design: Design, target: TargetDistribution, n_samples: int = 1_000_000,
                   seed: int = 0, workers: int = 1) -> DiscrepancyReport:
    """Monte-Carlo estimate of the squared discrepancy.

    The two target integrals are replaced by sample means over independent
    target draws ``t``, ``t'``; the design-pair term stays exact.  Draws are
    organised in fixed-size chunks with their own seed streams, so the result
    does not depend on ``workers``.
    """
    _check_pair(design, target)
    if n_samples < 1000:
        raise InvalidInput("n_samples must be at least 1000")
    sizes = [MC_CHUNK] * (n_samples // MC_CHUNK)
    if n_samples % MC_CHUNK:
        sizes.append(n_samples % MC_CHUNK)
    args = [(design.points, design.weights, target, seed, c, s) for c, s in enumerate(sizes)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda a: _mc_chunk(*a), args))
    else:
        parts = [_mc_chunk(*a) for a in args]
    s1 = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    mean = s1 / n_samples
    var = max(s2 / n_samples - mean * mean, 0.0) * n_samples / (n_samples - 1)
    se = math.sqrt(var / n_samples)
    d2 = mean + design_energy(design)
    clamped = d2 < 0.0
    d2 = max(d2, 0.0)
    return DiscrepancyReport(d2, math.sqrt(d2), target, "monte-carlo", se, clamped)
