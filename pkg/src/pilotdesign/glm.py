"""GLM weights, Fisher information matrices and tensor quadrature rules."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy.special import log_ndtr, roots_legendre

from .core import Design, ModelSpec, TargetDistribution
from .errors import InvalidInput

PROBIT_W0 = 2.0 / math.pi
PROBIT_CLAMP = PROBIT_W0 * 1e6
QUAD_CHUNK = 1 << 16


def glm_weights(link: str, eta) -> np.ndarray:
    """``1 / (Var(Y) h'(mu)^2)`` as a function of the linear predictor."""
    eta = np.asarray(eta, dtype=float)
    if link == "logit":
        e = np.exp(-np.abs(eta))
        return e / (1.0 + e) ** 2
    if link == "probit":
        log_phi = -0.5 * eta * eta - 0.5 * math.log(2.0 * math.pi)
        w = np.exp(2.0 * log_phi - log_ndtr(eta) - log_ndtr(-eta))
        return np.clip(w, 0.0, PROBIT_CLAMP)
    if link == "identity":
        return np.ones_like(eta)
    raise InvalidInput(f"unknown link {link!r}")


def mean_derivative(link: str, eta) -> np.ndarray:
    """``d h^{-1} / d eta``."""
    eta = np.asarray(eta, dtype=float)
    if link == "logit":
        e = np.exp(-np.abs(eta))
        return e / (1.0 + e) ** 2
    if link == "probit":
        return np.exp(-0.5 * eta * eta) / math.sqrt(2.0 * math.pi)
    if link == "identity":
        return np.ones_like(eta)
    raise InvalidInput(f"unknown link {link!r}")


def glm_weight(spec: ModelSpec, x) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return float(glm_weights(spec.link, spec.eta(x[None, :]))[0])


@dataclass(frozen=True)
class InfoMatrix:
    entries: np.ndarray
    source: str

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        a = 0.5 * (a + a.T)
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def l(self) -> int:  # noqa: E743
        return self.entries.shape[0]

    def to_json(self) -> dict:
        return {"source": self.source, "entries": self.entries.tolist()}


def _weighted_gram(g: np.ndarray, mass: np.ndarray) -> np.ndarray:
    return (g * mass[:, None]).T @ g


def info_exact(design: Design, spec: ModelSpec) -> InfoMatrix:
    if design.d != spec.d:
        raise InvalidInput(f"design dimension {design.d} does not match model dimension {spec.d}")
    g = spec.design_matrix(design.points)
    w = glm_weights(spec.link, g @ spec.beta)
    return InfoMatrix(_weighted_gram(g, design.weights * w), "exact-design")


def info_exact_batch(g: np.ndarray, mass: np.ndarray, link: str, betas: np.ndarray) -> np.ndarray:
    """Information matrices of one design for many coefficient vectors.

    ``g`` is the ``(m, l)`` basis matrix of the support, ``mass`` the design
    weights and ``betas`` a ``(B, l)`` array.  Returns ``(B, l, l)``.
    """
    w = glm_weights(link, betas @ g.T) * mass[None, :]
    return np.einsum("bi,ij,ik->bjk", w, g, g)


@dataclass(frozen=True)
class QuadratureRule:
    """Tensor-product rule for a product target on [-1, 1]^d.

    Only the one-dimensional nodes and weights are stored; the full grid is
    produced lazily in chunks.
    """

    nodes_1d: np.ndarray
    weights_1d: np.ndarray
    target: TargetDistribution
    level: int

    @property
    def d(self) -> int:
        return self.target.d

    @property
    def size(self) -> int:
        return self.level**self.d

    @property
    def nodes(self) -> np.ndarray:
        return np.concatenate([x for x, _ in self.chunks()])

    @property
    def weights(self) -> np.ndarray:
        return np.concatenate([w for _, w in self.chunks()])

    def chunks(self, size: int = QUAD_CHUNK) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        d, k = self.d, self.level
        total = self.size
        for start in range(0, total, size):
            idx = np.arange(start, min(start + size, total))
            digits = np.empty((len(idx), d), dtype=np.int64)
            rem = idx
            for j in range(d - 1, -1, -1):
                digits[:, j] = rem % k
                rem = rem // k
            yield self.nodes_1d[digits], np.prod(self.weights_1d[digits], axis=1)


def default_level(d: int) -> int:
    if d <= 4:
        return 24
    if d <= 6:
        return 12
    if d == 7:
        return 8
    return 6


def quadrature(target: TargetDistribution, d: int | None = None, level: int | None = None) -> QuadratureRule:
    """Gauss-Legendre (uniform) or Gauss-Chebyshev first kind (arcsine) tensor rule."""
    d = target.d if d is None else d
    if d != target.d:
        target = TargetDistribution(target.kind, d)
    level = default_level(d) if level is None else level
    if level < 2:
        raise InvalidInput("quadrature level must be at least 2")
    if target.kind == "uniform":
        x, w = roots_legendre(level)
        w = w / 2.0
    elif target.kind == "arcsine":
        k = np.arange(1, level + 1)
        x = np.cos((2 * k - 1) * np.pi / (2 * level))[::-1]
        w = np.full(level, 1.0 / level)
    else:  # pragma: no cover - TargetDistribution validates kind
        raise InvalidInput(f"unsupported target {target.kind!r}")
    x.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(x, w, target, level)


def _integrate(spec: ModelSpec, rule: QuadratureRule, weight_fn) -> np.ndarray:
    if rule.d != spec.d:
        raise InvalidInput("quadrature dimension does not match model dimension")
    out = np.zeros((spec.l, spec.l))
    for x, q in rule.chunks():
        g = spec.design_matrix(x)
        out += _weighted_gram(g, q * weight_fn(g @ spec.beta))
    return out


def marginal_moments(kind: str, k_max: int) -> np.ndarray:
    """``E[x^k]``, ``k = 0..k_max``, for one coordinate of the target law."""
    k = np.arange(k_max + 1)
    out = np.zeros(k_max + 1)
    even = k % 2 == 0
    if kind == "uniform":
        out[even] = 1.0 / (k[even] + 1.0)
    elif kind == "arcsine":
        out[even] = [math.comb(int(j), int(j) // 2) / 2.0**j for j in k[even]]
    else:
        raise InvalidInput(f"unsupported target {kind!r}")
    return out


def moment_info(target: TargetDistribution, spec: ModelSpec) -> InfoMatrix:
    """Exact ``E[g g^T]`` under the target; the identity-link information."""
    if target.d != spec.d:
        raise InvalidInput("target dimension does not match model dimension")
    e = spec.basis
    pair = e[:, None, :] + e[None, :, :]
    mom = marginal_moments(target.kind, int(pair.max()))
    return InfoMatrix(np.prod(mom[pair], axis=2), "target-moments")


def info_target(target: TargetDistribution, spec: ModelSpec, rule: QuadratureRule | None = None) -> InfoMatrix:
    """Information matrix of the continuous design that follows ``target``.

    Without an explicit rule the identity link uses exact moments.
    """
    if rule is None and spec.link == "identity":
        return moment_info(target, spec)
    rule = quadrature(target) if rule is None else rule
    if rule.target != target:
        raise InvalidInput("quadrature rule was built for a different target")
    return InfoMatrix(_integrate(spec, rule, lambda eta: glm_weights(spec.link, eta)), "target-quadrature")


def ei_matrix(spec: ModelSpec, imse_target: TargetDistribution, rule: QuadratureRule | None = None) -> np.ndarray:
    """``∫ g g^T (d mu / d eta)^2 dF`` for the prediction-error criterion."""
    rule = quadrature(imse_target) if rule is None else rule
    if rule.target != imse_target:
        raise InvalidInput("quadrature rule was built for a different target")
    a = _integrate(spec, rule, lambda eta: mean_derivative(spec.link, eta) ** 2)
    return 0.5 * (a + a.T)

