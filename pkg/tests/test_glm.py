import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import norm

from pilotdesign.core import Design, ModelSpec, TargetDistribution, main_effects_basis
from pilotdesign.errors import InvalidInput
from pilotdesign.glm import (PROBIT_CLAMP, ei_matrix, glm_weight, glm_weights, info_exact, info_exact_batch,
                             info_target, marginal_moments, mean_derivative, moment_info, quadrature)

import oracles


@given(st.floats(-30, 30))
def test_logit_weight(eta):
    # mu (1 - mu) written without the cancellation in 1 - mu
    assert glm_weights("logit", eta) == pytest.approx(1.0 / (2.0 + 2.0 * math.cosh(eta)), rel=1e-12)


@given(st.floats(-8, 8))
def test_probit_weight(eta):
    ref = norm.pdf(eta) ** 2 / (norm.cdf(eta) * norm.sf(eta))
    assert glm_weights("probit", eta) == pytest.approx(ref, rel=1e-9)


def test_probit_weight_extremes_are_finite():
    w = glm_weights("probit", np.array([-60.0, -38.0, 0.0, 38.0, 60.0]))
    assert np.all(np.isfinite(w)) and np.all(w >= 0) and np.all(w <= PROBIT_CLAMP)
    assert w[2] == pytest.approx(2 / math.pi)


def test_mean_derivative():
    assert mean_derivative("logit", 0.0) == pytest.approx(0.25)
    assert mean_derivative("probit", 0.0) == pytest.approx(1 / math.sqrt(2 * math.pi))
    assert mean_derivative("identity", 3.0) == 1.0
    with pytest.raises(InvalidInput):
        glm_weights("loglog", 0.0)


def test_info_exact_two_point_logit():
    spec = ModelSpec("logit", [[0], [1]], [0.0, 0.0])
    info = info_exact(Design.from_points([[-1.0], [1.0]]), spec).entries
    np.testing.assert_allclose(info, 0.25 * np.eye(2), atol=1e-15)
    assert glm_weight(spec, [0.3]) == 0.25


def test_info_exact_respects_counts():
    spec = ModelSpec("identity", [[0], [1]], [0.0, 0.0])
    info = info_exact(Design.from_points([[-1.0], [1.0]], [3, 1]), spec).entries
    np.testing.assert_allclose(info, [[1.0, -0.5], [-0.5, 1.0]])


def test_info_exact_batch_matches_loop():
    spec = ModelSpec("probit", main_effects_basis(2, [(0, 1)]), np.zeros(4))
    d = Design.from_points(np.random.default_rng(0).uniform(-1, 1, (9, 2)))
    betas = np.random.default_rng(1).normal(size=(5, 4))
    batch = info_exact_batch(spec.design_matrix(d.points), d.weights, "probit", betas)
    for b, m in zip(betas, batch):
        np.testing.assert_allclose(m, info_exact(d, spec.with_beta(b)).entries, rtol=1e-13)


@pytest.mark.parametrize("kind", ["uniform", "arcsine"])
@pytest.mark.parametrize("level", [2, 3, 7])
def test_quadrature_sanity(kind, level):
    spec = ModelSpec("identity", [[0], [1]], [0.0, 0.0])
    t = TargetDistribution(kind)
    info = info_target(t, spec, quadrature(t, level=level)).entries
    expect = np.diag([1.0, 1 / 3]) if kind == "uniform" else np.diag([1.0, 0.5])
    np.testing.assert_allclose(info, expect, atol=1e-12)


@pytest.mark.parametrize("case", ["logit_quad", "probit_line", "identity_cubic"])
@pytest.mark.parametrize("kind", ["uniform", "arcsine"])
def test_info_target_matches_frozen_oracle(oracle_values, case, kind):
    c = oracle_values["info_target"][case]
    spec = ModelSpec(c["link"], [[p] for p in c["powers"]], c["beta"])
    t = TargetDistribution(kind)
    got = info_target(t, spec, quadrature(t, level=60)).entries
    np.testing.assert_allclose(got, c[kind], rtol=1e-9, atol=1e-12)


def test_tensor_rule_matches_1d_product():
    spec = ModelSpec("logit", main_effects_basis(2), [0.2, 1.0, -0.5])
    t = TargetDistribution("uniform", 2)
    rule = quadrature(t, level=30)
    assert rule.size == 900
    assert rule.weights.sum() == pytest.approx(1.0)
    assert len(list(rule.chunks(size=100))) == 9
    ref = oracles._expect(lambda a: oracles._expect(
        lambda b: oracles.glm_weight_ref("logit", 0.2 + a - 0.5 * b), "uniform"), "uniform")
    assert info_target(t, spec, rule).entries[0, 0] == pytest.approx(ref, rel=1e-10)


def test_rule_target_mismatch():
    spec = ModelSpec("logit", [[0], [1]], [0.0, 1.0])
    with pytest.raises(InvalidInput):
        info_target(TargetDistribution("uniform"), spec, quadrature(TargetDistribution("arcsine")))
    with pytest.raises(InvalidInput):
        quadrature(TargetDistribution("uniform"), level=1)


def test_moments_and_identity_shortcut():
    np.testing.assert_allclose(marginal_moments("uniform", 4), [1, 0, 1 / 3, 0, 1 / 5])
    np.testing.assert_allclose(marginal_moments("arcsine", 4), [1, 0, 1 / 2, 0, 3 / 8])
    spec = ModelSpec("identity", main_effects_basis(3, [(0, 0), (1, 2)]), np.ones(6))
    for kind in ("uniform", "arcsine"):
        t = TargetDistribution(kind, 3)
        np.testing.assert_allclose(moment_info(t, spec).entries,
                                   info_target(t, spec, quadrature(t, level=6)).entries, atol=1e-14)


def test_ei_matrix_identity_link_is_moment_matrix():
    spec = ModelSpec("identity", main_effects_basis(2), np.zeros(3))
    t = TargetDistribution("uniform", 2)
    np.testing.assert_allclose(ei_matrix(spec, t), np.diag([1, 1 / 3, 1 / 3]), atol=1e-14)


def test_ei_matrix_logit_zero_beta():
    spec = ModelSpec("logit", [[0], [1]], [0.0, 0.0])
    np.testing.assert_allclose(ei_matrix(spec, TargetDistribution("arcsine")), np.diag([1, 0.5]) / 16, atol=1e-15)
