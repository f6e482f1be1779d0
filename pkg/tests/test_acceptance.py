"""Acceptance checks; one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` (lines appear in the summary
section) or directly with ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import math
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))
from _acceptance_log import record  # noqa: E402

from pilotdesign.bounds import bound_check  # noqa: E402
from pilotdesign.core import Design, ModelSpec, TargetDistribution, main_effects_basis  # noqa: E402
from pilotdesign.discrepancy import discrepancy_closed, discrepancy_mc  # noqa: E402
from pilotdesign.generators import GeneratorSpec, family_label, generate  # noqa: E402
from pilotdesign.glm import info_target, quadrature  # noqa: E402
from pilotdesign.optimal import (CriterionMatrix, candidate_grid, default_candidates, l_efficiency,  # noqa: E402
                                 solve_l_optimal)
from pilotdesign.study import (STUDY_FAMILIES, STUDY_METHODS, COEFFICIENT_BOXES, THREADS_ENV, emit_report,  # noqa: E402
                               ex3_bases, example_config, run_study)

import oracles  # noqa: E402

CHAIN_TOL = 1e-9
IDENTITY_TOL = 1e-10


def check_mc_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240501)
    worst, cases = 0.0, 0
    for d in (1, 2, 4):
        for kind in ("uniform", "arcsine"):
            target = TargetDistribution(kind, d)
            for i in range(10):
                design = Design.from_points(rng.uniform(-1, 1, (int(rng.integers(2, 17)), d)))
                closed = discrepancy_closed(design, target).d_squared
                mc = discrepancy_mc(design, target, 10**6, seed=1000 + i)
                worst = max(worst, abs(closed - mc.d_squared) / mc.mc_std_error)
                cases += 1
    dt = time.perf_counter() - t0
    return worst <= 3.0 and dt < 60, f"{cases} designs, max |closed - mc| = {worst:.2f} SE, {dt:.1f}s"


def check_hand_values():
    d = Design.from_points([[0.0]])
    u = discrepancy_closed(d, TargetDistribution("uniform")).d_squared
    a = discrepancy_closed(d, TargetDistribution("arcsine")).d_squared
    eu, ea = abs(u - 1 / 6), abs(a - (2 / math.pi - 4 / math.pi**2))
    return max(eu, ea) <= 1e-12, f"D2_unif={u:.15f} (err {eu:.1e}), D2_asin={a:.15f} (err {ea:.1e})"


def check_reflection():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        d = int(rng.integers(1, 6))
        design = Design.from_points(rng.uniform(-1, 1, (int(rng.integers(1, 20)), d)))
        for kind in ("uniform", "arcsine"):
            t = TargetDistribution(kind, d)
            base = discrepancy_closed(design, t).d
            for axis in range(d):
                worst = max(worst, abs(discrepancy_closed(design.reflect(axis), t).d - base))
    return worst < 1e-12, f"100 designs, max |dD| over all flips = {worst:.1e}"


def check_solver():
    t0 = time.perf_counter()
    grid = np.linspace(-1, 1, 201)[:, None]
    logit = solve_l_optimal(grid, ModelSpec("logit", [[0], [1]], [0.0, 0.0]), tol=1e-7)
    ident = solve_l_optimal(grid, ModelSpec("identity", [[0], [1]], [0.0, 0.0]), tol=1e-7)
    ok = logit.equivalence_gap <= 1e-7 and abs(logit.criterion_value - 8.0) <= 1e-5
    ok &= ident.equivalence_gap <= 1e-7 and abs(ident.criterion_value - 2.0) <= 1e-5
    rng = np.random.default_rng(99)
    rel = []
    for _ in range(5):
        link = str(rng.choice(["logit", "probit", "identity"]))
        beta = rng.uniform(-2, 2, 2)
        res = solve_l_optimal(grid, ModelSpec(link, [[0], [1]], beta), tol=1e-7)
        brute = oracles.two_point_a_opt(link, beta, grid[:, 0])[0]
        rel.append(abs(res.criterion_value - brute) / brute)
    dt = time.perf_counter() - t0
    ok &= max(rel) <= 0.005 and dt < 30
    return ok, (f"logit {logit.criterion_value:.7f} gap {logit.equivalence_gap:.1e}; identity "
                f"{ident.criterion_value:.7f}; brute-force max rel diff {max(rel):.1e}; {dt:.1f}s")


def _chain_case(rng):
    """One random (family, seed, beta, model) from the Example 1/2 settings."""
    fam = str(rng.choice(STUDY_FAMILIES))
    kind = str(rng.choice(["uniform", "arcsine"]))
    seed = int(rng.integers(0, 2**31))
    if rng.random() < 0.5:
        n, d, link = 16, 4, "logit"
        lo, hi = COEFFICIENT_BOXES[str(rng.choice(list(COEFFICIENT_BOXES)))]
        basis = main_effects_basis(4)
        beta = rng.uniform(lo, hi)
    else:
        n, d, link = 32, 6, "probit"
        extra = [] if rng.random() < 0.5 else [(0, 1), (1, 2), (3, 5)]
        basis = main_effects_basis(6, extra)
        beta = rng.uniform(-1.2, 1.2, len(basis))
    spec = ModelSpec(link, basis, beta)
    target = TargetDistribution(kind, d)
    design = generate(GeneratorSpec(fam, n, d, seed, method=STUDY_METHODS.get(fam, "anneal")), target)
    return fam, kind, spec, target, design


def check_chain():
    t0 = time.perf_counter()
    rng = np.random.default_rng(314)
    holds, singular, min_margin = 0, 0, np.inf
    id_cases, id_fail, id_worst = 0, 0, 0.0
    for _ in range(50):
        fam, kind, spec, target, design = _chain_case(rng)
        opt = solve_l_optimal(default_candidates(spec.d), spec, CriterionMatrix.identity(spec.l), tol=1e-6)
        bc = bound_check(design, spec, target, CriterionMatrix.identity(spec.l), opt, quadrature(target))
        if bc.singular:
            singular += 1
            continue
        holds += bc.chain_holds
        min_margin = min(min_margin, bc.margin)
        if bc.identity_gap is not None:
            id_cases += 1
            id_worst = max(id_worst, bc.identity_gap)
            id_fail += bc.identity_gap > IDENTITY_TOL
    dt = time.perf_counter() - t0
    live = 50 - singular
    ok = holds == live and id_fail == 0 and dt < 300
    return ok, (f"chain holds {holds}/{live} (min margin {min_margin:.2e}, {singular} singular); "
                f"eigenvalue identity fails {id_fail}/{id_cases} cases with rho<1 "
                f"(max gap {id_worst:.2e}); {dt:.0f}s")


def check_ex1_desk():
    t0 = time.perf_counter()
    res = run_study(example_config("ex1"), threads=1)
    dt = time.perf_counter() - t0
    disc = {r["family"]: r["disc_median"] for r in res.summary if r["group"] == "B1"}
    low, high = ("SSD", "MPLHD"), ("MmLHD", "mcLHD", "Random")
    ok_a = all(disc[a] < disc[b] for a in low for b in high)
    ok_b = all(v < 0 for v in res.spearman.values())
    med = ", ".join(f"{k} {disc[k]:.4f}" for k in low + high)
    rho = ", ".join(f"{k} {v:+.3f}" for k, v in res.spearman.items())
    return ok_a and ok_b and dt < 600, f"(a) medians D_unif: {med}; (b) Spearman {rho}; {dt:.0f}s"


def check_ex3():
    bases = ex3_bases(7)
    n_ok = len(bases) == 174
    t = TargetDistribution("arcsine", 7)
    design = generate(GeneratorSpec("scrambled-sobol", 128, 7, seed=0), t)
    cand = candidate_grid(7, 3)
    rng = np.random.default_rng(5)
    worst = 0.0
    for name, basis in [bases[0], bases[5], bases[-1]]:
        effs = []
        for beta in (rng.normal(size=len(basis)), rng.normal(size=len(basis)) * 10):
            spec = ModelSpec("identity", basis, beta)
            L = CriterionMatrix.identity(spec.l)
            effs.append(l_efficiency(design, spec, L, solve_l_optimal(cand, spec, L, tol=1e-6)).value)
        worst = max(worst, abs(effs[0] - effs[1]))
    return n_ok and worst <= 1e-12, (f"basis count {len(bases)} (expected 174; 'any-pair' reading gives "
                                     f"{len(ex3_bases(7, 'any-pair'))}); beta-independence max diff {worst:.1e}")


def check_quadrature():
    spec = ModelSpec("identity", [[0], [1]], [0.0, 0.0])
    worst = 0.0
    for kind, expect in (("uniform", np.diag([1, 1 / 3])), ("arcsine", np.diag([1, 1 / 2]))):
        t = TargetDistribution(kind)
        for level in (2, 3, 5, 24):
            worst = max(worst, np.abs(info_target(t, spec, quadrature(t, level=level)).entries - expect).max())
    return worst <= 1e-12, f"levels 2,3,5,24 both targets, max entry error {worst:.1e}"


def check_determinism():
    old = os.environ.pop(THREADS_ENV, None)
    try:
        cfg = example_config("ex1", seeds=3, coeff_grid=2, bound_betas=2)
        with tempfile.TemporaryDirectory() as tmp:
            emit_report(run_study(cfg, threads=1), Path(tmp) / "t1")
            emit_report(run_study(cfg, threads=8), Path(tmp) / "t8")
            a = (Path(tmp) / "t1" / "rows.csv").read_bytes()
            b = (Path(tmp) / "t8" / "rows.csv").read_bytes()
    finally:
        if old is not None:
            os.environ[THREADS_ENV] = old
    return a == b, f"ex1 (3 seeds, k=2) rows.csv {len(a)} bytes, identical at 1 and 8 threads: {a == b}"


CRITERIA = [
    ("discrepancy MC oracle", check_mc_oracle),
    ("hand-derived discrepancies", check_hand_values),
    ("reflection invariance", check_reflection),
    ("solver correctness", check_solver),
    ("efficiency-bound chain", check_chain),
    ("ex1 desk-scale ordering", check_ex1_desk),
    ("ex3 structure", check_ex3),
    ("quadrature sanity", check_quadrature),
    ("determinism 1 vs 8 threads", check_determinism),
]


@pytest.mark.parametrize("name,check", CRITERIA, ids=[c[0].replace(" ", "_") for c in CRITERIA])
def test_acceptance(name, check):
    ok, detail = check()
    record(name, ok, detail)
    assert ok, detail


if __name__ == "__main__":
    failures = 0
    for name, check in CRITERIA:
        ok, detail = check()
        record(name, ok, detail)
        failures += not ok
    sys.exit(1 if failures else 0)
