"""Coefficient spaces, the three benchmark studies and their report files.

A study crosses ten design families (five constructions, each mapped to the
uniform and the arcsine target) with ``R`` seed replications and a set of
model points ``(basis, beta)``.  Every design gets its discrepancy against its
own target and its A-efficiency at every model point.  Optima are solved once
per model point and shared by all families.
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.stats import qmc, spearmanr

from . import __version__
from .bounds import chain_from_values, whitened_spectrum
from .core import ModelSpec, TargetDistribution, main_effects_basis, unit_cube_to_design
from .discrepancy import discrepancy_closed
from .errors import InfeasibleCandidates, InvalidInput, SingularInformation
from .generators import GeneratorSpec, family_label, unit_cube_points
from .glm import info_exact_batch, info_target, quadrature
from .optimal import EIG_FLOOR, CriterionMatrix, candidate_grid, solve_l_optimal

log = logging.getLogger(__name__)

GRID_CAP = 100_000
THREADS_ENV = "PILOT_DESIGN_THREADS"
ROW_COLUMNS = ("family", "seed", "beta_id", "basis_id", "discrepancy", "a_efficiency", "flags")
SAMPLING_MODES = ("grid", "sobol", "fixed")

# five constructions; each appears once per target
STUDY_FAMILIES = ("scrambled-sobol", "maximin-lhd", "mincorr-lhd", "maxpro-lhd", "random")
STUDY_TARGETS = ("uniform", "arcsine")
# best-of-5 random LHDs for maximin / correlation, annealing for MaxPro
STUDY_METHODS = {"maximin-lhd": "restarts", "mincorr-lhd": "restarts", "maxpro-lhd": "anneal"}

COEFFICIENT_BOXES = {
    "B1": ((-3, -2, -3, 0, -2.5), (3, 4, 3, 6, 3.5)),
    "B2": ((-1, 0, -1, 2, -0.5), (1, 2, 1, 4, 1.5)),
    "B3": ((-3, 4, 5, -6, -2.5), (3, 10, 11, 0, 3.5)),
}


@dataclass(frozen=True)
class CoefficientSpace:
    """Box ``[lo_j, hi_j]`` of coefficient vectors and how to sample it."""

    name: str
    lo: tuple
    hi: tuple
    mode: str = "grid"
    k: int = 3
    n_points: int = 256
    points: tuple = ()
    cap: int = GRID_CAP

    def __post_init__(self):
        lo, hi = np.asarray(self.lo, dtype=float), np.asarray(self.hi, dtype=float)
        if lo.ndim != 1 or lo.shape != hi.shape or lo.size == 0:
            raise InvalidInput("lo and hi must be equal-length vectors")
        if np.any(lo > hi):
            raise InvalidInput("each interval needs lo <= hi")
        if self.mode not in SAMPLING_MODES:
            raise InvalidInput(f"unknown sampling mode {self.mode!r}; expected one of {SAMPLING_MODES}")
        object.__setattr__(self, "lo", tuple(float(v) for v in lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in hi))
        if self.mode == "grid" and (self.k < 1 or self.k**lo.size > self.cap):
            raise InvalidInput(f"grid of {self.k}^{lo.size} points exceeds the cap of {self.cap}")
        if self.mode == "sobol" and not 1 <= self.n_points <= self.cap:
            raise InvalidInput(f"Sobol sample size must be in [1, {self.cap}]")
        if self.mode == "fixed":
            pts = np.atleast_2d(np.asarray(self.points, dtype=float))
            if pts.size == 0 or pts.shape[1] != lo.size:
                raise InvalidInput("fixed mode needs a non-empty list of vectors of the right length")
            if len(pts) > self.cap:
                raise InvalidInput(f"{len(pts)} fixed vectors exceed the cap of {self.cap}")
            object.__setattr__(self, "points", tuple(map(tuple, pts.tolist())))

    @property
    def l(self) -> int:  # noqa: E743
        return len(self.lo)

    @property
    def size(self) -> int:
        if self.mode == "grid":
            return self.k**self.l
        return self.n_points if self.mode == "sobol" else len(self.points)


def coefficient_box(name: str, k: int = 3) -> CoefficientSpace:
    lo, hi = COEFFICIENT_BOXES[name]
    return CoefficientSpace(name, lo, hi, "grid", k=k)


def sample_coefficients(space: CoefficientSpace, seed: int = 0) -> np.ndarray:
    """Coefficient vectors as an ``(N, l)`` array.

    Grids include the interval endpoints and vary the last coefficient
    fastest; Sobol samples are scrambled and mapped affinely into the box.
    """
    lo, hi = np.array(space.lo), np.array(space.hi)
    if space.mode == "grid":
        axes = [np.linspace(a, b, space.k) if space.k > 1 else np.array([(a + b) / 2.0])
                for a, b in zip(lo, hi)]
        return np.array(list(itertools.product(*axes)))
    if space.mode == "sobol":
        u = qmc.Sobol(space.l, scramble=True, seed=np.random.default_rng(seed)).random(space.n_points)
        return lo + (hi - lo) * u
    pts = np.array(space.points, dtype=float)
    if np.any(pts < lo) or np.any(pts > hi):
        raise InvalidInput("fixed coefficient vectors must lie inside the box")
    return pts


def _term_name(pair) -> str:
    i, j = pair
    return f"x{i + 1}^2" if i == j else f"x{i + 1}x{j + 1}"


EX3_CONVENTIONS = ("disjoint", "any-pair")


def ex3_bases(d: int = 7, convention: str = "disjoint") -> list[tuple[str, np.ndarray]]:
    """Main effects, plus one second-order term, plus two interactions.

    The single extra term ranges over all ``x_i x_j`` with ``i <= j``.  Pairs
    of interactions use distinct index pairs; ``"disjoint"`` further requires
    the two pairs to share no factor, ``"any-pair"`` allows overlap.
    """
    if convention not in EX3_CONVENTIONS:
        raise InvalidInput(f"unknown convention {convention!r}; expected one of {EX3_CONVENTIONS}")
    out = [("main", main_effects_basis(d))]
    second = [(i, j) for i in range(d) for j in range(i, d)]
    out += [(_term_name(t), main_effects_basis(d, [t])) for t in second]
    inter = [(i, j) for i in range(d) for j in range(i + 1, d)]
    for a, b in itertools.combinations(inter, 2):
        if convention == "disjoint" and set(a) & set(b):
            continue
        out.append((f"{_term_name(a)}+{_term_name(b)}", main_effects_basis(d, [a, b])))
    return out


@dataclass(frozen=True)
class ModelGroup:
    """Bases and coefficient vectors summarised together (one boxplot panel)."""

    name: str
    bases: tuple
    betas: np.ndarray
    beta_ids: tuple


@dataclass(frozen=True)
class StudyConfig:
    example: str
    n: int
    d: int
    link: str
    seeds: int = 20
    master_seed: int = 0
    coeff_grid: int = 3
    sobol_n: int = 256
    full_scale: bool = False
    threads: int = 1
    solver_tol: float = 1e-5
    candidate_points: int | None = None
    candidate_family: str = "tensor"
    methods: dict = field(default_factory=lambda: dict(STUDY_METHODS))
    optimizer_budget: int | None = None
    bound_betas: int = 8
    bound_quad_level: int | None = None
    ex3_convention: str = "disjoint"
    coefficient_range: float = 1.2
    families: tuple = STUDY_FAMILIES
    # custom studies only
    basis: tuple | None = None
    space: dict | None = None

    def __post_init__(self):
        bad = set(self.families) - set(STUDY_FAMILIES)
        if bad or not self.families:
            raise InvalidInput(f"unknown study families {sorted(bad)}; expected a subset of {STUDY_FAMILIES}")
        object.__setattr__(self, "families", tuple(self.families))
        if self.seeds < 1 or self.n < 2 or self.d < 1:
            raise InvalidInput("need seeds >= 1, n >= 2 and d >= 1")
        if self.example == "custom" and (self.basis is None or self.space is None):
            raise InvalidInput("a custom study needs 'basis' and 'space'")

    def to_json(self) -> dict:
        return asdict(self)


def example_config(example: str, full_scale: bool = False, **overrides) -> StudyConfig:
    """Shipped configs; desk scale unless ``full_scale``.

    ``example="custom"`` takes everything from ``overrides``: at least
    ``n``, ``d``, ``link``, ``basis`` (exponent rows) and ``space`` (keyword
    arguments of :class:`CoefficientSpace` without ``name``).
    """
    if example == "custom":
        overrides = {k: v for k, v in overrides.items() if v is not None}
        return StudyConfig(example="custom", full_scale=full_scale, **overrides)
    base = {
        "ex1": dict(n=16, d=4, link="logit", coeff_grid=7 if full_scale else 3),
        "ex2": dict(n=32, d=6, link="probit", sobol_n=1024 if full_scale else 256,
                    candidate_family="sobol", bound_quad_level=8),
        "ex3": dict(n=128, d=7, link="identity", candidate_points=3),
    }
    if example not in base:
        raise InvalidInput(f"unknown example {example!r}; expected ex1, ex2 or ex3")
    cfg = StudyConfig(example=example, seeds=100 if full_scale else 20, full_scale=full_scale, **base[example])
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return replace(cfg, **overrides)


def config_from_json(obj: dict | str | Path) -> StudyConfig:
    if isinstance(obj, (str, Path)):
        obj = json.loads(Path(obj).read_text())
    obj = dict(obj)
    example = obj.pop("example", None)
    if example is None:
        raise InvalidInput("config needs an 'example' key")
    full = bool(obj.pop("full_scale", False))
    known = set(StudyConfig.__dataclass_fields__)
    unknown = set(obj) - known
    if unknown:
        raise InvalidInput(f"unknown config keys: {sorted(unknown)}")
    return example_config(example, full, **obj)


def model_groups(cfg: StudyConfig) -> list[ModelGroup]:
    if cfg.example == "ex1":
        groups = []
        for name in COEFFICIENT_BOXES:
            betas = sample_coefficients(coefficient_box(name, cfg.coeff_grid))
            ids = tuple(f"{name}:{i}" for i in range(len(betas)))
            groups.append(ModelGroup(name, (("main", main_effects_basis(cfg.d)),), betas, ids))
        return groups
    if cfg.example == "ex2":
        groups = []
        for name, extra in (("lp1", []), ("lp2", [(0, 1), (1, 2), (3, 5)])):
            basis = main_effects_basis(cfg.d, extra)
            r = cfg.coefficient_range
            space = CoefficientSpace(name, [-r] * len(basis), [r] * len(basis), "sobol", n_points=cfg.sobol_n)
            betas = sample_coefficients(space, seed=cfg.master_seed)
            ids = tuple(f"{name}:{i}" for i in range(len(betas)))
            groups.append(ModelGroup(name, ((name, basis),), betas, ids))
        return groups
    if cfg.example == "ex3":
        bases = tuple(ex3_bases(cfg.d, cfg.ex3_convention))
        # identity link: beta only enters through a constant weight
        return [ModelGroup("linear", bases, np.zeros((1, 1)), ("linear:0",))]
    if cfg.example == "custom":
        basis = np.asarray(cfg.basis, dtype=np.int64)
        space = CoefficientSpace("custom", **cfg.space)
        if space.l != len(basis):
            raise InvalidInput("coefficient space and basis have different lengths")
        betas = sample_coefficients(space, seed=cfg.master_seed)
        return [ModelGroup("custom", (("custom", basis),), betas,
                           tuple(f"custom:{i}" for i in range(len(betas))))]
    raise InvalidInput(f"unknown example {cfg.example!r}")


def _task_seed(master: int, fam: int, rep: int) -> int:
    return int(np.random.SeedSequence([master, fam, rep]).generate_state(1, np.uint32)[0])


@dataclass
class StudyResult:
    config: StudyConfig
    rows: list
    summary: list
    spearman: dict
    bounds: dict
    n_bases: dict
    spearman_by_target: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"config": self.config.to_json(), "summary": self.summary,
                "spearman": self.spearman, "spearman_by_target": self.spearman_by_target,
                "bounds": self.bounds, "n_bases": self.n_bases}


def _l_values(infos: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """A-criterion ``tr(I^{-1})`` for a stack; inf where singular."""
    lam = np.linalg.eigvalsh(infos)
    singular = (lam[..., -1] <= 0) | (lam[..., 0] <= EIG_FLOOR * lam[..., -1])
    with np.errstate(divide="ignore"):
        vals = np.where(singular, np.inf, np.sum(1.0 / np.where(singular[..., None], 1.0, lam), axis=-1))
    return vals, singular


def _fmt(x: float) -> str:
    return repr(float(x)) if np.isfinite(x) else "nan"


def run_study(cfg: StudyConfig, threads: int | None = None) -> StudyResult:
    """Run one study; output is independent of the worker count."""
    env = os.environ.get(THREADS_ENV)
    threads = int(env) if env else (threads or cfg.threads)
    if threads < 1:
        raise InvalidInput("threads must be at least 1")
    groups = model_groups(cfg)
    cand = candidate_grid(cfg.d, cfg.candidate_points, family=cfg.candidate_family, seed=cfg.master_seed)

    # designs: the same unit-cube points feed the uniform and arcsine families
    jobs = [(fi, fam, r, _task_seed(cfg.master_seed, fi, r))
            for fi, fam in enumerate(STUDY_FAMILIES) if fam in cfg.families for r in range(cfg.seeds)]

    def make(job):
        _, fam, _, seed = job
        spec = GeneratorSpec(fam, cfg.n, cfg.d, seed, cfg.optimizer_budget, cfg.methods.get(fam, "anneal"))
        u = unit_cube_points(spec)
        out = []
        for kind in STUDY_TARGETS:
            target = TargetDistribution(kind, cfg.d)
            design = unit_cube_to_design(u, target)
            out.append((kind, design, discrepancy_closed(design, target).d))
        return out

    with ThreadPoolExecutor(threads) as pool:
        made = list(pool.map(make, jobs))
    designs = []  # (family label, family order, rep, seed, kind, design, D)
    for (fi, fam, r, seed), pair in zip(jobs, made):
        for ti, (kind, design, disc) in enumerate(pair):
            designs.append((family_label(fam, kind), 2 * fi + ti, r, seed, kind, design, disc))
    log.info("generated %d designs", len(designs))

    # optima per model point, shared by every family
    solve_jobs = [(gi, bi, k) for gi, grp in enumerate(groups)
                  for bi in range(len(grp.bases)) for k in range(len(grp.betas))]

    def solve(job):
        gi, bi, k = job
        grp = groups[gi]
        basis = grp.bases[bi][1]
        beta = grp.betas[k] if grp.betas.shape[1] == len(basis) else np.zeros(len(basis))
        spec = ModelSpec(cfg.link, basis, beta)
        try:
            res = solve_l_optimal(cand, spec, CriterionMatrix.identity(spec.l), tol=cfg.solver_tol)
        except (InfeasibleCandidates, SingularInformation):
            return spec, float("nan"), "solver_failed"
        return spec, res.criterion_value, "" if res.converged else "unconverged"

    with ThreadPoolExecutor(threads) as pool:
        optima = dict(zip(solve_jobs, pool.map(solve, solve_jobs)))
    log.info("solved %d optima", len(optima))

    rows = []
    stats = {}  # (group, family) -> list of per-seed efficiency arrays, discrepancies
    for gi, grp in enumerate(groups):
        for bi, (basis_id, basis) in enumerate(grp.bases):
            specs = [optima[(gi, bi, k)] for k in range(len(grp.betas))]
            betas = np.array([s[0].beta for s in specs])
            opt = np.array([s[1] for s in specs])
            for label, order, r, seed, kind, design, disc in designs:
                g = specs[0][0].design_matrix(design.points)
                vals, singular = _l_values(info_exact_batch(g, design.weights, cfg.link, betas))
                eff = np.where(singular, 0.0, opt / vals)
                for k in range(len(grp.betas)):
                    flags = [f for f in (specs[k][2], "singular" if singular[k] else "",
                                         "above_one" if eff[k] > 1.0 + cfg.solver_tol else "") if f]
                    rows.append(((order, r, gi, bi, k), label, seed, grp.beta_ids[k], basis_id,
                                 disc, eff[k], ";".join(flags)))
                key = (grp.name, label)
                st = stats.setdefault(key, {"order": order, "eff": {}, "disc": {}})
                st["eff"].setdefault(r, []).append(eff)
                st["disc"][r] = disc
    rows.sort(key=lambda row: row[0])
    rows = [row[1:] for row in rows]

    summary, spearman, by_target = _summarise(groups, stats)
    bounds = _bound_checks(cfg, groups, designs, optima)
    n_bases = {grp.name: len(grp.bases) for grp in groups}
    return StudyResult(cfg, rows, summary, spearman, bounds, n_bases, by_target)


def _summarise(groups, stats):
    summary = []
    spearman, by_target = {}, {}
    for grp in groups:
        fam_rows = []
        for (gname, label), st in sorted(stats.items(), key=lambda kv: kv[1]["order"]):
            if gname != grp.name:
                continue
            # per model point, average over seed replications
            per_seed = np.array([np.concatenate(st["eff"][r]) for r in sorted(st["eff"])])
            eff = per_seed.mean(axis=0)
            q = np.quantile(eff, [0.0, 0.25, 0.5, 0.75, 1.0])
            fam_rows.append({
                "group": gname, "family": label,
                "eff_min": float(q[0]), "eff_q1": float(q[1]), "eff_median": float(q[2]),
                "eff_q3": float(q[3]), "eff_max": float(q[4]),
                "disc_median": float(np.median(list(st["disc"].values()))),
            })
        summary += fam_rows
        if len(fam_rows) > 1:
            spearman[grp.name] = _spearman(fam_rows)
        for kind, prefix in (("uniform", ""), ("arcsine", "Asin")):
            same = [r for r in fam_rows if r["family"].startswith("Asin") == bool(prefix)]
            if len(same) > 1:
                by_target.setdefault(grp.name, {})[kind] = _spearman(same)
    return summary, spearman, by_target


def _spearman(rows) -> float:
    return float(spearmanr([r["disc_median"] for r in rows], [r["eff_min"] for r in rows]).statistic)


def _bound_checks(cfg, groups, designs, optima) -> dict:
    """Spectral chain on a strided subset of model points, every design."""
    if cfg.bound_betas <= 0:
        return {"checked": 0, "violations": 0, "records": []}
    records = []
    rules = {kind: quadrature(TargetDistribution(kind, cfg.d), level=cfg.bound_quad_level)
             for kind in STUDY_TARGETS}
    for gi, grp in enumerate(groups):
        nb = len(grp.betas)
        picks = np.unique(np.linspace(0, nb - 1, min(cfg.bound_betas, nb)).round().astype(int))
        for bi in range(len(grp.bases)):
            for k in picks:
                spec, opt_value, flag = optima[(gi, bi, int(k))]
                if flag == "solver_failed":
                    continue
                for kind in STUDY_TARGETS:
                    target = TargetDistribution(kind, cfg.d)
                    rule = None if cfg.link == "identity" else rules[kind]
                    tar = info_target(target, spec, rule).entries
                    tar_value = float(np.trace(np.linalg.inv(tar)))
                    sub = [x for x in designs if x[4] == kind]
                    mats = np.array([info_exact_batch(spec.design_matrix(x[5].points), x[5].weights,
                                                      cfg.link, spec.beta[None, :])[0] for x in sub])
                    vals, _ = _l_values(mats)
                    lams = whitened_spectrum(mats, tar)
                    for x, v, lam in zip(sub, vals, lams):
                        bc = chain_from_values(v, tar_value, opt_value, lam)
                        rec = {"family": x[0], "seed": x[3], "beta_id": grp.beta_ids[k],
                               "basis_id": grp.bases[bi][0]}
                        rec.update(bc.to_json())
                        records.append(rec)
    live = [r for r in records if not r["singular"]]
    gaps = [r["identity_gap"] for r in live if r["identity_gap"] is not None]
    return {
        "checked": len(live),
        "skipped_singular": len(records) - len(live),
        "violations": sum(not r["chain_holds"] for r in live),
        "min_margin": min((r["margin"] for r in live), default=None),
        "identity_cases": len(gaps),
        "identity_max_gap": max(gaps, default=None),
        "records": records,
    }


def emit_report(result: StudyResult, out_dir: str | Path, fmt: str = "csv") -> list[Path]:
    """Write rows, summary, bound checks and a manifest into ``out_dir``."""
    if fmt not in ("csv", "json"):
        raise InvalidInput("format must be 'csv' or 'json'")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt == "csv":
        path = out / "rows.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(ROW_COLUMNS)
            for fam, seed, beta_id, basis_id, disc, eff, flags in result.rows:
                w.writerow([fam, seed, beta_id, basis_id, _fmt(disc), _fmt(eff), flags])
        written.append(path)
        path = out / "summary.csv"
        cols = ("group", "family", "eff_min", "eff_q1", "eff_median", "eff_q3", "eff_max", "disc_median")
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for r in result.summary:
                w.writerow([r[c] if isinstance(r[c], str) else _fmt(r[c]) for c in cols])
        written.append(path)
    else:
        path = out / "rows.json"
        path.write_text(json.dumps([dict(zip(ROW_COLUMNS, (f, s, b, g, float(d), float(e), fl)))
                                    for f, s, b, g, d, e, fl in result.rows]))
        written.append(path)
    path = out / "summary.json"
    path.write_text(json.dumps({"summary": result.summary, "spearman": result.spearman,
                                "spearman_by_target": result.spearman_by_target,
                                "n_bases": result.n_bases}, indent=2))
    written.append(path)
    path = out / "bounds.json"
    path.write_text(json.dumps(result.bounds, indent=1))
    written.append(path)
    path = out / "manifest.json"
    path.write_text(json.dumps({"version": __version__, "config": result.config.to_json(),
                                "master_seed": result.config.master_seed, "rows": len(result.rows)},
                               indent=2))
    written.append(path)
    return written
