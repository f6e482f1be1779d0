"""Domain types: exact designs, GLM model specifications and target laws.

Every design lives on the experimental region [-1, 1]^d.  Points drawn on the
unit cube are mapped there either by an affine rescaling (uniform target) or
by the arcsine inverse CDF.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidInput

LINKS = ("logit", "probit", "identity")
TARGETS = ("uniform", "arcsine")

MERGE_TOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _as_points(points, d: int | None = None) -> np.ndarray:
    x = np.array(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None] if d == 1 else x[None, :]
    if x.ndim != 2 or x.shape[0] == 0:
        raise InvalidInput(f"expected a non-empty (m, d) array of points, got shape {x.shape}")
    if d is not None and x.shape[1] != d:
        raise InvalidInput(f"points have dimension {x.shape[1]}, expected {d}")
    if not np.all(np.isfinite(x)):
        raise InvalidInput("points must be finite")
    return x


def _merge_duplicates(points: np.ndarray, counts: np.ndarray, tol: float):
    """Sort points lexicographically and fold near-identical neighbours."""
    order = np.lexsort(points.T[::-1])
    points, counts = points[order], counts[order]
    if len(points) == 1:
        return points, counts
    same = np.all(np.abs(np.diff(points, axis=0)) <= tol, axis=1)
    starts = np.concatenate([[True], ~same])
    group = np.cumsum(starts) - 1
    merged = np.zeros(group[-1] + 1, dtype=np.int64)
    np.add.at(merged, group, counts)
    return points[starts], merged


@dataclass(frozen=True)
class Design:
    """Exact design: ``m`` distinct support points with replication counts.

    Use :meth:`from_points` to build one from raw (possibly repeated) points;
    the constructor itself expects already-distinct support points.
    """

    points: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        x = _as_points(self.points)
        c = np.asarray(self.counts)
        if c.shape != (x.shape[0],):
            raise InvalidInput("counts must have one entry per point")
        if not np.all(c == np.round(c)) or np.any(c < 1):
            raise InvalidInput("counts must be positive integers")
        if np.any(np.abs(x) > 1.0):
            raise InvalidInput("design coordinates must lie in [-1, 1]")
        order = np.lexsort(x.T[::-1])
        if len(x) > 1 and np.any(np.all(np.abs(np.diff(x[order], axis=0)) <= MERGE_TOL, axis=1)):
            raise InvalidInput("design points must be distinct; use Design.from_points to merge")
        object.__setattr__(self, "points", _frozen(x))
        object.__setattr__(self, "counts", _frozen(c.astype(np.int64)))

    @classmethod
    def from_points(cls, points, counts=None, tol: float = MERGE_TOL) -> "Design":
        x = _as_points(points)
        c = np.ones(len(x), dtype=np.int64) if counts is None else np.asarray(counts)
        if c.shape != (len(x),):
            raise InvalidInput("counts must have one entry per point")
        if not np.all(c == np.round(c)) or np.any(c < 1):
            raise InvalidInput("counts must be positive integers")
        x, c = _merge_duplicates(x, c.astype(np.int64), tol)
        return cls(x, c)

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def weights(self) -> np.ndarray:
        """Masses of the empirical distribution, ``n_i / n``."""
        return self.counts / self.counts.sum()

    def reflect(self, axis: int) -> "Design":
        x = self.points.copy()
        x[:, axis] = -x[:, axis]
        return Design.from_points(x, self.counts)

    def to_csv(self, path: str | Path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{j + 1}" for j in range(self.d)] + ["count"])
            for row, c in zip(self.points, self.counts):
                w.writerow([repr(float(v)) for v in row] + [int(c)])

    @classmethod
    def from_csv(cls, path: str | Path) -> "Design":
        with Path(path).open(newline="") as fh:
            reader = csv.reader(fh)
            header = [h.strip() for h in next(reader)]
            has_count = header[-1] == "count"
            coord_cols = header[:-1] if has_count else header
            if not coord_cols or any(h != f"x{j + 1}" for j, h in enumerate(coord_cols)):
                raise InvalidInput(f"bad design CSV header: {header}")
            rows = [r for r in reader if r and any(s.strip() for s in r)]
        if not rows:
            raise InvalidInput("design CSV has no rows")
        data = np.array([[float(v) for v in r] for r in rows])
        if has_count:
            return cls.from_points(data[:, :-1], data[:, -1].astype(np.int64))
        return cls.from_points(data)


@dataclass(frozen=True)
class ModelSpec:
    """GLM specification: link, monomial basis and coefficient vector.

    ``basis`` is an ``(l, d)`` integer array; row ``j`` holds the exponents of
    the ``j``-th basis monomial.  The identity link stands for a Gaussian
    response with unit noise variance.
    """

    link: str
    basis: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        if self.link not in LINKS:
            raise InvalidInput(f"unknown link {self.link!r}; expected one of {LINKS}")
        e = np.array(self.basis)
        if e.ndim != 2 or e.shape[0] < 1 or e.shape[1] < 1:
            raise InvalidInput("basis must be a non-empty list of exponent vectors")
        if not np.all(e == np.round(e)) or np.any(e < 0):
            raise InvalidInput("basis exponents must be non-negative integers")
        e = e.astype(np.int64)
        if len({tuple(r) for r in e}) != len(e):
            raise InvalidInput("basis terms must be pairwise distinct")
        b = np.array(self.beta, dtype=float).reshape(-1)
        if b.shape != (e.shape[0],):
            raise InvalidInput(f"beta has length {b.size}, basis has {e.shape[0]} terms")
        if not np.all(np.isfinite(b)):
            raise InvalidInput("beta must be finite")
        object.__setattr__(self, "basis", _frozen(e))
        object.__setattr__(self, "beta", _frozen(b))

    @property
    def d(self) -> int:
        return self.basis.shape[1]

    @property
    def l(self) -> int:  # noqa: E743
        return self.basis.shape[0]

    def with_beta(self, beta) -> "ModelSpec":
        return ModelSpec(self.link, self.basis, beta)

    def design_matrix(self, x) -> np.ndarray:
        """Rows ``g(x_i)`` for an ``(N, d)`` array of points."""
        x = _as_points(x, self.d)
        powers = np.ones((int(self.basis.max()) + 1,) + x.shape)
        for k in range(1, len(powers)):
            powers[k] = powers[k - 1] * x
        out = np.ones((x.shape[0], self.l))
        for j in range(self.d):
            out *= powers[self.basis[:, j], :, j].T
        return out

    def eta(self, x) -> np.ndarray:
        return self.design_matrix(x) @ self.beta

    def to_json(self) -> dict:
        return {"link": self.link, "basis": self.basis.tolist(), "beta": self.beta.tolist()}

    @classmethod
    def from_json(cls, obj: dict | str | Path) -> "ModelSpec":
        if isinstance(obj, (str, Path)):
            obj = json.loads(Path(obj).read_text())
        try:
            return cls(obj["link"], obj["basis"], obj["beta"])
        except KeyError as exc:
            raise InvalidInput(f"model JSON is missing key {exc}") from None


def basis_eval(spec: ModelSpec, x) -> np.ndarray:
    """Evaluate the basis vector ``g(x)`` at a single point."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1 or x.size != spec.d:
        raise InvalidInput(f"point has dimension {x.size}, model expects {spec.d}")
    return spec.design_matrix(x[None, :])[0]


def linear_predictor(spec: ModelSpec, x) -> float:
    return float(basis_eval(spec, x) @ spec.beta)


def main_effects_basis(d: int, extra: Iterable[Sequence[int]] = ()) -> np.ndarray:
    """Intercept, the ``d`` linear terms, then products of the listed index tuples.

    ``extra=[(0, 1)]`` appends ``x_1 x_2``; ``(2, 2)`` appends ``x_3^2``.
    """
    rows = [np.zeros(d, dtype=np.int64)]
    rows += [np.eye(d, dtype=np.int64)[j] for j in range(d)]
    for term in extra:
        e = np.zeros(d, dtype=np.int64)
        for j in term:
            e[j] += 1
        rows.append(e)
    return np.array(rows)


@dataclass(frozen=True)
class TargetDistribution:
    """Product target law on [-1, 1]^d: ``uniform`` or ``arcsine``."""

    kind: str
    d: int = field(default=1)

    def __post_init__(self):
        if self.kind not in TARGETS:
            raise InvalidInput(f"unknown target {self.kind!r}; expected one of {TARGETS}")
        if int(self.d) != self.d or self.d < 1:
            raise InvalidInput("target dimension must be a positive integer")

    def pdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "uniform":
            marg = np.where(np.abs(x) <= 1, 0.5, 0.0)
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                marg = np.where(np.abs(x) < 1, 1.0 / (np.pi * np.sqrt(1.0 - x * x)), 0.0)
        return np.prod(marg, axis=-1)

    def cdf(self, x) -> np.ndarray:
        """Per-coordinate marginal CDF (elementwise)."""
        x = np.clip(np.asarray(x, dtype=float), -1.0, 1.0)
        if self.kind == "uniform":
            return (x + 1.0) / 2.0
        return 0.5 + np.arcsin(x) / np.pi

    def ppf(self, u) -> np.ndarray:
        """Per-coordinate inverse CDF (elementwise)."""
        u = np.asarray(u, dtype=float)
        if self.kind == "uniform":
            return 2.0 * u - 1.0
        return -np.cos(np.pi * u)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.ppf(rng.random((size, self.d)))


def unit_cube_to_design(points01, target: TargetDistribution) -> Design:
    """Map points on [0, 1]^d onto [-1, 1]^d through the target's inverse CDF."""
    u = _as_points(points01, target.d)
    if np.any(u < 0.0) or np.any(u > 1.0):
        raise InvalidInput("unit-cube coordinates must lie in [0, 1]")
    x = np.clip(target.ppf(u), -1.0, 1.0)
    return Design.from_points(x)
