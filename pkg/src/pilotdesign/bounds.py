"""Spectral check of the discrepancy-based L-efficiency lower bound.

With ``T = I(tar; M)`` and ``W = T^{-1/2} I(xi; M) T^{-1/2}`` the efficiency of
a design obeys

    eff(xi) >= eff(tar) * lambda_min(W)

because ``I(xi) >= lambda_min(W) T`` in the Loewner order.  The discrepancy
bound then follows from ``lambda_min(W) >= 1 - rho(Id - W)`` and the
Koksma-Hlawka inequality ``rho(Id - W) <= D(xi) V_M``.  The RKHS variation
``V_M`` is not computed here; everything else in the chain is.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Design, ModelSpec, TargetDistribution
from .errors import SingularInformation
from .glm import QuadratureRule, info_exact, info_target, quadrature
from .optimal import EIG_FLOOR, CriterionMatrix, SolveResult, l_value

CHAIN_TOL = 1e-9


@dataclass(frozen=True)
class BoundCheck:
    eff_design: float
    eff_target: float
    spectral_radius: float
    spectral_radius_term: float
    lambda_min: float
    lambda_max: float
    chain_holds: bool
    margin: float
    singular: bool = False

    @property
    def identity_gap(self) -> float | None:
        """``|1 - rho(Id - W) - lambda_min(W)|`` when ``rho < 1``, else None."""
        if self.singular or not self.spectral_radius < 1.0:
            return None
        return abs(1.0 - self.spectral_radius - self.lambda_min)

    def to_json(self) -> dict:
        return {
            "eff_design": self.eff_design,
            "eff_target": self.eff_target,
            "spectral_radius": self.spectral_radius,
            "spectral_radius_term": self.spectral_radius_term,
            "lambda_min": self.lambda_min,
            "lambda_max": self.lambda_max,
            "chain_holds": self.chain_holds,
            "margin": self.margin,
            "identity_gap": self.identity_gap,
            "singular": self.singular,
        }


def _inv_sqrt(t: np.ndarray) -> np.ndarray:
    lam, vec = np.linalg.eigh(t)
    if lam[-1] <= 0 or lam[0] <= EIG_FLOOR * lam[-1]:
        raise SingularInformation("target information matrix is singular", vec[:, 0])
    return (vec / np.sqrt(lam)) @ vec.T


def whitened_spectrum(info_design: np.ndarray, info_tar: np.ndarray) -> np.ndarray:
    """Eigenvalues of ``T^{-1/2} I T^{-1/2}``; accepts a stack of design matrices."""
    s = _inv_sqrt(info_tar)
    w = s @ info_design @ s
    w = 0.5 * (w + np.swapaxes(w, -1, -2))
    return np.linalg.eigvalsh(w)


def chain_from_values(design_value: float, target_value: float, opt_value: float,
                      lam: np.ndarray) -> BoundCheck:
    """Assemble a :class:`BoundCheck` from criterion values and the whitened spectrum."""
    lam_min, lam_max = float(lam[0]), float(lam[-1])
    rho = float(np.max(np.abs(1.0 - lam)))
    if not np.isfinite(design_value) or lam_min <= EIG_FLOOR * max(lam_max, 1.0):
        return BoundCheck(0.0, opt_value / target_value, rho, float("inf"), lam_min, lam_max,
                          False, float("nan"), True)
    eff_design = opt_value / design_value
    eff_target = opt_value / target_value
    radius = 1.0 / lam_min
    margin = eff_design - eff_target / radius
    return BoundCheck(eff_design, eff_target, rho, radius, lam_min, lam_max,
                      bool(margin >= -CHAIN_TOL), margin)


def bound_check(design: Design, spec: ModelSpec, target: TargetDistribution, L: CriterionMatrix,
                opt: SolveResult, rule: QuadratureRule | None = None) -> BoundCheck:
    rule = quadrature(target) if rule is None else rule
    tar = info_target(target, spec, rule).entries
    target_value = l_value(tar, L)
    ixi = info_exact(design, spec).entries
    try:
        design_value = l_value(ixi, L)
    except SingularInformation:
        design_value = float("inf")
    lam = whitened_spectrum(ixi, tar)
    return chain_from_values(design_value, target_value, opt.criterion_value, lam)
