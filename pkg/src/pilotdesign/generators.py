"""Space-filling designs on [0, 1]^d and their maps onto [-1, 1]^d.

Five base constructions are available: scrambled Sobol points, random Latin
hypercubes, and Latin hypercubes optimised for the maximin distance, for low
column correlation and for the maximum projection criterion.  Each can be
rescaled to the uniform target or pushed through the arcsine inverse CDF.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .core import Design, TargetDistribution, unit_cube_to_design
from .errors import InvalidInput

FAMILIES = ("scrambled-sobol", "random-lhd", "maximin-lhd", "mincorr-lhd", "maxpro-lhd", "random")
OPTIMIZED = ("maximin-lhd", "mincorr-lhd", "maxpro-lhd")
METHODS = ("anneal", "restarts")

# short names used in reports; arcsine versions get an "Asin" prefix
LABELS = {
    "scrambled-sobol": "SSD",
    "maximin-lhd": "MmLHD",
    "mincorr-lhd": "mcLHD",
    "maxpro-lhd": "MPLHD",
    "random": "Random",
    "random-lhd": "LHD",
}

SOBOL_MAX_DIM = qmc.Sobol.MAXDIM
MAXIMIN_POWER = 15
COOLING = 0.95
N_STAGES = 200
# candidate count of the best-of-k search, as in common LHD tooling
RESTARTS = 5


def family_label(family: str, target: str) -> str:
    label = LABELS[family]
    return label if target == "uniform" else "Asin" + label


def default_budget(d: int) -> int:
    return 10_000 * d


@dataclass(frozen=True)
class GeneratorSpec:
    family: str
    n: int
    d: int
    seed: int = 0
    optimizer_budget: int | None = None
    method: str = "anneal"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidInput(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.method not in METHODS:
            raise InvalidInput(f"unknown optimizer method {self.method!r}; expected one of {METHODS}")
        if self.n < 2 or self.d < 1:
            raise InvalidInput("need n >= 2 and d >= 1")
        if self.optimizer_budget is not None and self.optimizer_budget < 1:
            raise InvalidInput("optimizer_budget must be at least 1")

    @property
    def budget(self) -> int:
        if self.optimizer_budget is not None:
            return self.optimizer_budget
        return default_budget(self.d) if self.method == "anneal" else RESTARTS


def scrambled_sobol(n: int, d: int, seed: int = 0, scramble: bool = True) -> np.ndarray:
    """First ``n`` Sobol points (Joe-Kuo direction numbers).

    Scrambling is a random lower-triangular matrix scramble plus a digital
    shift.  Without scrambling the leading origin is skipped.
    """
    if d < 1 or d > SOBOL_MAX_DIM:
        raise InvalidInput(f"Sobol dimension must be in [1, {SOBOL_MAX_DIM}]")
    engine = qmc.Sobol(d, scramble=scramble, seed=np.random.default_rng(seed))
    with warnings.catch_warnings():
        # non power-of-two sizes are allowed; they just lose the net balance
        warnings.simplefilter("ignore", UserWarning)
        if not scramble:
            engine.fast_forward(1)
        return engine.random(n)


def random_lhd(n: int, d: int, seed: int = 0) -> np.ndarray:
    """Latin hypercube with jittered levels ``(k + u) / n``."""
    rng = np.random.default_rng(seed)
    perms = np.argsort(rng.random((n, d)), axis=0)
    return (perms + rng.random((n, d))) / n


def random_design(n: int, d: int, seed: int = 0) -> np.ndarray:
    return np.random.default_rng(seed).random((n, d))


def _midpoints(levels: np.ndarray) -> np.ndarray:
    return (levels + 0.5) / len(levels)


class _PairSum:
    """Objective ``log Σ_{i<k} φ(x_i, x_k)`` with O(n d) updates under a swap."""

    def __init__(self, x: np.ndarray):
        self.x = x
        self.n = len(x)
        self.p = np.zeros((self.n, self.n))
        for i in range(self.n):
            self.p[i] = self.row(x, i)
        self.total = self.p.sum() / 2.0

    def row(self, x, i):  # pragma: no cover - abstract
        raise NotImplementedError

    @property
    def energy(self) -> float:
        return math.log(self.total)

    def propose(self, j, a, b):
        x = self.x.copy()
        x[a, j], x[b, j] = x[b, j], x[a, j]
        ra, rb = self.row(x, a), self.row(x, b)
        if not (np.all(np.isfinite(ra)) and np.all(np.isfinite(rb))):
            return None
        old = self.p[a].sum() + self.p[b].sum() - self.p[a, b]
        new = ra.sum() + rb.sum() - ra[b]
        total = self.total - old + new
        if not np.isfinite(total) or total <= 0:
            return None
        return math.log(total) - self.energy, (x, ra, rb, total, a, b)

    def commit(self, state):
        x, ra, rb, total, a, b = state
        self.x = x
        self.p[a], self.p[:, a] = ra, ra
        self.p[b], self.p[:, b] = rb, rb
        self.total = total


class _MaximinEnergy(_PairSum):
    # Morris-Mitchell surrogate: Σ d_ik^{-p}
    def row(self, x, i):
        d2 = np.sum((x - x[i]) ** 2, axis=1)
        with np.errstate(divide="ignore"):
            r = d2 ** (-MAXIMIN_POWER / 2.0)
        r[i] = 0.0
        return r

    def score(self):
        # largest d^{-p} entry belongs to the closest pair
        return self.p.max() ** (-1.0 / MAXIMIN_POWER), -self.energy


class _MaxProEnergy(_PairSum):
    def row(self, x, i):
        with np.errstate(divide="ignore"):
            r = np.prod((x - x[i]) ** -2.0, axis=1)
        r[i] = 0.0
        return r

    def score(self):
        return (-self.energy,)


class _CorrEnergy:
    def __init__(self, x):
        self.x = x
        self.energy = correlation_objective(x)

    def propose(self, j, a, b):
        x = self.x.copy()
        x[a, j], x[b, j] = x[b, j], x[a, j]
        e = correlation_objective(x)
        return e - self.energy, (x, e)

    def commit(self, state):
        self.x, self.energy = state

    def score(self):
        return (-self.energy,)


def min_distance(x: np.ndarray) -> float:
    diff = x[:, None, :] - x[None, :, :]
    d2 = np.sum(diff * diff, axis=2)
    d2[np.diag_indices(len(x))] = np.inf
    return float(np.sqrt(d2.min()))


def correlation_objective(x: np.ndarray) -> float:
    """Sum of squared pairwise Pearson correlations between columns."""
    c = np.corrcoef(x, rowvar=False)
    iu = np.triu_indices(x.shape[1], 1)
    return float(np.sum(c[iu] ** 2))


def maxpro_criterion(x: np.ndarray) -> float:
    """``[(2 / (n (n - 1))) Σ_{i<k} Π_j (x_ij - x_kj)^{-2}]^{1/d}``."""
    n, d = x.shape
    iu = np.triu_indices(n, 1)
    diff = x[iu[0]] - x[iu[1]]
    with np.errstate(divide="ignore"):
        s = np.sum(np.prod(diff**-2.0, axis=1))
    return float((2.0 * s / (n * (n - 1))) ** (1.0 / d))


def _anneal(energy, n, d, rng, budget):
    """Simulated annealing over within-column swaps; returns the best design seen."""
    best_x, best_score = energy.x.copy(), energy.score()
    if n < 2:
        return best_x
    cols = rng.integers(0, d, size=budget + 100)
    rows_a = rng.integers(0, n, size=budget + 100)
    rows_b = (rows_a + rng.integers(1, n, size=budget + 100)) % n
    unif = rng.random(budget)

    ups = []
    for t in range(100):
        prop = energy.propose(cols[budget + t], rows_a[budget + t], rows_b[budget + t])
        if prop is not None and prop[0] > 0:
            ups.append(prop[0])
    temp = float(np.mean(ups)) / math.log(2.0) if ups else 1e-12
    stage = max(1, budget // N_STAGES)

    for t in range(budget):
        prop = energy.propose(cols[t], rows_a[t], rows_b[t])
        if prop is not None:
            delta, state = prop
            if delta <= 0 or (temp > 0 and unif[t] < math.exp(-delta / temp)):
                energy.commit(state)
                score = energy.score()
                if score > best_score:
                    best_x, best_score = energy.x.copy(), score
        if (t + 1) % stage == 0:
            temp *= COOLING
    return best_x


def _optimized_lhd(kind, n, d, seed, budget, method="anneal"):
    if budget < 1:
        raise InvalidInput("budget must be at least 1")
    rng = np.random.default_rng(seed)
    if method == "restarts":
        # best of `budget` independent jittered LHDs, no local moves
        best_x, best_score = None, None
        for _ in range(budget):
            perms = np.argsort(rng.random((n, d)), axis=0)
            x = (perms + rng.random((n, d))) / n
            score = kind(x).score()
            if best_score is None or score > best_score:
                best_x, best_score = x, score
        return best_x
    if method != "anneal":
        raise InvalidInput(f"unknown optimizer method {method!r}")
    levels = np.argsort(rng.random((n, d)), axis=0)
    energy = kind(_midpoints(levels))
    return _anneal(energy, n, d, rng, budget)


def maximin_lhd(n: int, d: int, seed: int = 0, budget: int | None = None,
                method: str = "anneal") -> np.ndarray:
    """LHD with a large minimum pairwise distance.

    ``method="anneal"`` anneals a midpoint LHD, scoring moves with the
    Morris-Mitchell ``phi_15`` surrogate and returning the best design seen by
    (minimum distance, surrogate).  ``method="restarts"`` keeps the best of
    ``budget`` jittered random LHDs.
    """
    budget = budget or (default_budget(d) if method == "anneal" else RESTARTS)
    return _optimized_lhd(_MaximinEnergy, n, d, seed, budget, method)


def mincorr_lhd(n: int, d: int, seed: int = 0, budget: int | None = None,
                method: str = "anneal") -> np.ndarray:
    if d < 2:
        raise InvalidInput("correlation-minimising LHD needs d >= 2")
    budget = budget or (default_budget(d) if method == "anneal" else RESTARTS)
    return _optimized_lhd(_CorrEnergy, n, d, seed, budget, method)


def maxpro_lhd(n: int, d: int, seed: int = 0, budget: int | None = None,
               method: str = "anneal") -> np.ndarray:
    budget = budget or (default_budget(d) if method == "anneal" else RESTARTS)
    return _optimized_lhd(_MaxProEnergy, n, d, seed, budget, method)


def unit_cube_points(spec: GeneratorSpec) -> np.ndarray:
    if spec.family == "scrambled-sobol":
        return scrambled_sobol(spec.n, spec.d, spec.seed)
    if spec.family == "random-lhd":
        return random_lhd(spec.n, spec.d, spec.seed)
    if spec.family == "random":
        return random_design(spec.n, spec.d, spec.seed)
    fn = {"maximin-lhd": maximin_lhd, "mincorr-lhd": mincorr_lhd, "maxpro-lhd": maxpro_lhd}[spec.family]
    return fn(spec.n, spec.d, spec.seed, spec.budget, spec.method)


def generate(spec: GeneratorSpec, target: TargetDistribution) -> Design:
    if target.d != spec.d:
        raise InvalidInput("target dimension does not match generator dimension")
    return unit_cube_to_design(unit_cube_points(spec), target)
