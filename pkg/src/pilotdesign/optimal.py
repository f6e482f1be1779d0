"""Locally L-optimal continuous designs over a candidate set, and efficiencies.

The criterion is ``tr(I(p)^{-1} L)`` for a PSD matrix ``L``; A-optimality uses
the identity, c-optimality a rank-one ``L``.  Weights are found with the
multiplicative algorithm ``p_i <- p_i d_i(p) / tr(I(p)^{-1} L)`` where
``d_i(p) = w(x_i) g(x_i)^T I^{-1} L I^{-1} g(x_i)`` is the sensitivity of
candidate ``i``.  The general equivalence theorem gives the stopping rule and
a certificate: at the optimum no sensitivity exceeds the criterion value.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .core import Design, ModelSpec, TargetDistribution
from .errors import InfeasibleCandidates, InvalidInput, SingularInformation
from .generators import scrambled_sobol
from .glm import InfoMatrix, QuadratureRule, ei_matrix, glm_weights, info_exact

EIG_FLOOR = 1e-12
PRUNE = 1e-12
SUPPORT_TOL = 1e-6
CANDIDATE_CAP = 1 << 16
# active-set housekeeping for the multiplicative iterations
DROP_REL = 1e-6
INNER_STEPS = 500

CRITERION_KINDS = ("A-identity", "c-vector", "standardized-A", "EI", "custom")


@dataclass(frozen=True)
class CriterionMatrix:
    entries: np.ndarray
    kind: str = "custom"

    def __post_init__(self):
        a = np.array(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise InvalidInput("criterion matrix must be square")
        if not np.allclose(a, a.T, atol=1e-12 * max(1.0, np.abs(a).max())):
            raise InvalidInput("criterion matrix must be symmetric")
        if self.kind not in CRITERION_KINDS:
            raise InvalidInput(f"unknown criterion kind {self.kind!r}")
        a = 0.5 * (a + a.T)
        if np.linalg.eigvalsh(a).min() < -1e-10 * max(1.0, np.abs(a).max()):
            raise InvalidInput("criterion matrix must be positive semidefinite")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @classmethod
    def identity(cls, l: int) -> "CriterionMatrix":  # noqa: E741
        return cls(np.eye(l), "A-identity")

    @classmethod
    def c_vector(cls, c) -> "CriterionMatrix":
        c = np.asarray(c, dtype=float)
        return cls(np.outer(c, c), "c-vector")

    @classmethod
    def coordinate(cls, l: int, j: int) -> "CriterionMatrix":  # noqa: E741
        """``e_j e_j^T``: variance of the ``j``-th coefficient."""
        if not 0 <= j < l:
            raise InvalidInput(f"coordinate {j} out of range for l = {l}")
        return cls.c_vector(np.eye(l)[j])

    def scaled(self, c: float) -> "CriterionMatrix":
        return CriterionMatrix(self.entries * c, self.kind if self.kind != "A-identity" else "custom")

    def to_json(self) -> dict:
        return {"kind": self.kind, "entries": self.entries.tolist()}


@dataclass(frozen=True)
class DesignWeights:
    candidates: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.weights, dtype=float)
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise InvalidInput("design weights must be non-negative and sum to one")

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.weights > 0)


@dataclass(frozen=True)
class SolveResult:
    weights: DesignWeights
    criterion_value: float
    equivalence_gap: float
    iterations: int
    converged: bool
    criterion: CriterionMatrix
    tol: float
    history: tuple = field(default=(), repr=False)

    def sensitivities(self, spec: ModelSpec) -> np.ndarray:
        g = spec.design_matrix(self.weights.candidates)
        w = glm_weights(spec.link, g @ spec.beta)
        return _sensitivity(g, w, self.weights.weights, self.criterion.entries)[1]

    def to_json(self) -> dict:
        sup = self.weights.support
        return {
            "criterion_value": self.criterion_value,
            "equivalence_gap": self.equivalence_gap,
            "iterations": self.iterations,
            "converged": self.converged,
            "tol": self.tol,
            "criterion": self.criterion.kind,
            "support": self.weights.candidates[sup].tolist(),
            "weights": self.weights.weights[sup].tolist(),
        }


def _inverse(m: np.ndarray) -> np.ndarray:
    lam, vec = np.linalg.eigh(m)
    if lam[-1] <= 0 or lam[0] <= EIG_FLOOR * lam[-1]:
        raise SingularInformation(
            f"information matrix is singular (eigenvalues {lam[0]:.3e} .. {lam[-1]:.3e})", vec[:, 0])
    return (vec / lam) @ vec.T


def l_value(info: InfoMatrix | np.ndarray, L: CriterionMatrix | np.ndarray) -> float:
    """``tr(I^{-1} L)``."""
    m = info.entries if isinstance(info, InfoMatrix) else np.asarray(info, dtype=float)
    a = L.entries if isinstance(L, CriterionMatrix) else np.asarray(L, dtype=float)
    if m.shape != a.shape:
        raise InvalidInput(f"shape mismatch: information {m.shape}, criterion {a.shape}")
    return float(np.sum(_inverse(m) * a))


def _sensitivity(g, w, p, a):
    mi = _inverse((g * (p * w)[:, None]).T @ g)
    b = mi @ a @ mi
    return float(np.sum(mi * a)), w * np.einsum("ij,ij->i", g @ b, g)


def candidate_grid(d: int, points_per_axis: int | None = None, family: str = "tensor",
                   n_points: int | None = None, cap: int = CANDIDATE_CAP, seed: int = 0) -> np.ndarray:
    """Candidate support points on [-1, 1]^d.

    ``family="tensor"`` is an equispaced grid including the faces;
    ``family="sobol"`` is a scrambled Sobol cloud augmented with the ``2^d``
    vertices (capped at ``cap`` points in total).
    """
    if family == "tensor":
        k = points_per_axis or (201 if d == 1 else 7)
        if k**d > cap:
            raise InvalidInput(
                f"tensor grid of {k}^{d} = {k**d} points exceeds the cap of {cap}; use family='sobol'")
        axis = np.linspace(-1.0, 1.0, k)
        return np.array(list(itertools.product(axis, repeat=d)))
    if family == "sobol":
        n = n_points or (1 << 14)
        vertices = np.array(list(itertools.product((-1.0, 1.0), repeat=d)))
        if n + len(vertices) > cap:
            raise InvalidInput(f"candidate cloud of {n + len(vertices)} points exceeds the cap of {cap}")
        return np.vstack([vertices, 2.0 * scrambled_sobol(n, d, seed) - 1.0])
    raise InvalidInput(f"unknown candidate family {family!r}")


def default_candidates(d: int, seed: int = 0) -> np.ndarray:
    if d <= 4:
        return candidate_grid(d)
    return candidate_grid(d, family="sobol", seed=seed)


def solve_l_optimal(candidates, spec: ModelSpec, L: CriterionMatrix | None = None, tol: float = 1e-7,
                    max_iter: int = 100_000, record_history: bool = False) -> SolveResult:
    """Multiplicative algorithm with an equivalence-theorem stopping rule.

    Iterations run on an active set: candidates whose weight has collapsed are
    set aside, and any candidate violating the equivalence bound on the full
    set is brought back, so the certificate always refers to every candidate.
    """
    x = np.atleast_2d(np.asarray(candidates, dtype=float))
    if x.shape[1] != spec.d:
        raise InvalidInput("candidate dimension does not match model dimension")
    L = CriterionMatrix.identity(spec.l) if L is None else L
    a = L.entries
    if a.shape != (spec.l, spec.l):
        raise InvalidInput("criterion matrix size does not match the basis")
    g = spec.design_matrix(x)
    w = glm_weights(spec.link, g @ spec.beta)
    n = len(x)
    p = np.full(n, 1.0 / n)
    try:
        tr, d = _sensitivity(g, w, p, a)
    except SingularInformation as exc:
        raise InfeasibleCandidates(
            "candidates do not support a nonsingular information matrix") from exc

    history = [tr] if record_history else None
    it = 0
    gap = d.max() / tr - 1.0
    while gap > tol and it < max_iter:
        viol = d > tr * (1.0 + tol)
        active = (p > DROP_REL * p.max()) | viol
        trial = np.where(active, np.where(viol, np.maximum(p, DROP_REL * p.max()), p), 0.0)
        trial /= trial.sum()
        try:
            tr_trial, _ = _sensitivity(g[active], w[active], trial[active], a)
        except SingularInformation:
            tr_trial = np.inf
        if tr_trial > tr * (1.0 + 1e-13):
            # dropping would cost criterion value: keep every live candidate
            active = p > 0
        else:
            p = trial
        idx = np.flatnonzero(active)
        gs, ws, ps = g[idx], w[idx], p[idx]
        inner_goal = max(0.5 * tol, 0.05 * gap)
        try:
            trs, ds = _sensitivity(gs, ws, ps, a)
            for _ in range(INNER_STEPS):
                if ds.max() / trs - 1.0 <= inner_goal or it >= max_iter:
                    break
                ps = ps * ds / trs
                ps /= ps.sum()
                trs, ds = _sensitivity(gs, ws, ps, a)
                it += 1
                if record_history:
                    history.append(trs)
        except SingularInformation:
            # the iterates are heading for a singular optimum (typical for c-criteria)
            break
        p = np.zeros(n)
        p[idx] = ps
        tr, d = _sensitivity(g, w, p, a)
        gap = d.max() / tr - 1.0

    p = np.where(p < PRUNE, 0.0, p)
    p /= p.sum()
    tr, d = _sensitivity(g, w, p, a)
    gap = d.max() / tr - 1.0
    return SolveResult(DesignWeights(x, p), tr, gap, it, bool(gap <= tol), L, tol,
                       tuple(history) if record_history else ())


@dataclass(frozen=True)
class Efficiency:
    value: float
    design_value: float
    singular: bool = False

    def to_json(self) -> dict:
        return {"efficiency": self.value, "design_criterion": self.design_value, "singular": self.singular}


def l_efficiency(design: Design, spec: ModelSpec, L: CriterionMatrix, opt: SolveResult) -> Efficiency:
    """``L_opt(xi_opt) / L_opt(xi)``; 0 with a flag when the design is singular."""
    try:
        value = l_value(info_exact(design, spec), L)
    except SingularInformation:
        return Efficiency(0.0, float("inf"), True)
    return Efficiency(opt.criterion_value / value, value)


@dataclass(frozen=True)
class StandardizedA:
    criterion: CriterionMatrix
    coordinate_optima: tuple


def standardized_a_matrix(candidates, spec: ModelSpec, tol: float = 1e-7,
                          max_iter: int = 100_000) -> StandardizedA:
    """Diagonal ``L`` with entries ``1 / min_xi (I^{-1}(xi))_jj``."""
    sols = tuple(solve_l_optimal(candidates, spec, CriterionMatrix.coordinate(spec.l, j), tol, max_iter)
                 for j in range(spec.l))
    diag = np.array([1.0 / s.criterion_value for s in sols])
    return StandardizedA(CriterionMatrix(np.diag(diag), "standardized-A"), sols)


def ei_criterion(spec: ModelSpec, imse_target: TargetDistribution,
                 rule: QuadratureRule | None = None) -> CriterionMatrix:
    return CriterionMatrix(ei_matrix(spec, imse_target, rule), "EI")


def ei_efficiency(design: Design, spec: ModelSpec, imse_target: TargetDistribution, opt: SolveResult,
                  rule: QuadratureRule | None = None) -> Efficiency:
    """Prediction-error efficiency; ``opt`` must have been solved for the same EI matrix."""
    L = ei_criterion(spec, imse_target, rule)
    if not np.allclose(L.entries, opt.criterion.entries, rtol=1e-10, atol=1e-14):
        raise InvalidInput("opt was not solved for this EI criterion")
    return l_efficiency(design, spec, L, opt)
