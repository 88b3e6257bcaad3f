import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.stats import binom

from gaul.errors import DegeneratePriorError, DimensionError, SingularityError
from gaul.potentials import (BimodalTarget, MixtureTarget, QuadCosTarget, QuadraticTarget,
                             density, eval_gradient, eval_potential, make_logistic_target,
                             synthesize_logistic_data)


def _rotation(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def _targets():
    x, y = synthesize_logistic_data(50, 2, [1.0, 1.0], 7)
    p = _rotation(0.3)
    return {
        "quadratic": QuadraticTarget([9.0, 2.0, 0.5]),
        "rotated": QuadraticTarget([4.0, 0.25], p),
        "mixture": MixtureTarget([0.5, 0.5]),
        "mixture-wide": MixtureTarget([3.0, 3.0]),
        "quadcos": QuadCosTarget(p @ np.diag([1.0, 0.04]) @ p.T, math.sqrt(0.95) * np.ones(2)),
        "bimodal": BimodalTarget(),
        "logistic": make_logistic_target(x, y, 0.5),
    }


TARGETS = _targets()


def _fd(target, x, step=1e-5):
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        g[i] = (target.potential(x + e) - target.potential(x - e)) / (2 * step)
    return g


# Oracles: hand-derived values.

def test_quadratic_examples():
    assert eval_potential(QuadraticTarget([1.0]), [0.0]) == 0.0
    assert eval_potential(QuadraticTarget([4.0]), [1.0]) == 2.0
    assert eval_gradient(QuadraticTarget([4.0]), [1.0])[0] == 4.0


def test_mixture_examples():
    t = MixtureTarget([0.5, 0.5])
    assert eval_potential(t, [0.5, 0.5]) == pytest.approx(-0.31326168751822283, abs=1e-15)
    assert np.all(eval_gradient(t, [0.0, 0.0]) == 0.0)


def test_mixture_matches_textbook_form(rng):
    t = MixtureTarget([0.5, -1.5])
    alpha = np.array([0.5, -1.5])
    for x in rng.normal(0, 2, (50, 2)):
        v = x @ alpha
        f = 0.5 * np.sum((x - alpha) ** 2) - math.log1p(math.exp(-2 * v))
        g = x - alpha + 2 * alpha / (1 + math.exp(2 * v))
        assert t.potential(x) == pytest.approx(f, rel=1e-13, abs=1e-13)
        np.testing.assert_allclose(t.gradient(x), g, rtol=1e-12, atol=1e-13)


def test_mixture_is_stable_far_out():
    t = MixtureTarget([3.0, 3.0])
    x = np.array([[400.0, 400.0], [-400.0, -400.0]])
    assert np.all(np.isfinite(t.potential(x)))
    np.testing.assert_allclose(t.gradient(x), [[397.0, 397.0], [-397.0, -397.0]])


def test_quadcos_gradient_vanishes_at_origin():
    t = TARGETS["quadcos"]
    np.testing.assert_array_equal(eval_gradient(t, [0.0, 0.0]), [0.0, 0.0])
    assert eval_potential(t, [0.0, 0.0]) == -1.0


def test_bimodal_density_matches_its_definition(rng):
    t = BimodalTarget()
    pts = rng.normal(0, 3, (100, 2))
    r = np.linalg.norm(pts, axis=1)
    x1 = pts[:, 0]
    ref = np.exp(-2 * (r - 3) ** 2) * (np.exp(-2 * (x1 - 3) ** 2) + np.exp(-2 * (x1 + 3) ** 2))
    np.testing.assert_allclose(density(t, pts), ref, rtol=1e-12, atol=1e-300)


def test_bimodal_gradient_singular_at_origin():
    with pytest.raises(SingularityError):
        BimodalTarget().gradient([0.0, 0.0])
    with pytest.raises(DimensionError):
        BimodalTarget().potential([1.0, 2.0, 3.0])


def test_dimension_mismatch_raises():
    with pytest.raises(DimensionError):
        eval_potential(QuadraticTarget([1.0, 1.0]), [1.0])
    with pytest.raises(DimensionError):
        eval_gradient(MixtureTarget([1.0, 1.0]), np.zeros((3, 3)))


def test_quadratic_validates_inputs():
    with pytest.raises(ValueError):
        QuadraticTarget([1.0, 2.0])
    with pytest.raises(ValueError):
        QuadraticTarget([1.0, -1.0])
    with pytest.raises(ValueError):
        QuadraticTarget([2.0, 1.0], [[1.0, 1.0], [0.0, 1.0]])


def test_batch_and_single_point_agree():
    for name, t in TARGETS.items():
        pts = np.random.default_rng(1).normal(0, 1.5, (5, t.dim)) + 0.1
        batch_f, batch_g = t.potential(pts), t.gradient(pts)
        for i, x in enumerate(pts):
            assert t.potential(x) == pytest.approx(batch_f[i], rel=1e-14, abs=1e-14), name
            np.testing.assert_allclose(t.gradient(x), batch_g[i], rtol=1e-14, atol=1e-14)


# Logistic target.

def test_logistic_bounds_identity_covariance():
    col = np.where(np.arange(50) % 3 == 0, 1.0, -1.0)
    x = np.stack([col, col * np.repeat([1.0, -1.0], 25)], axis=1)
    assert np.allclose(x.T @ x / 50, np.eye(2))
    t = make_logistic_target(x, np.zeros(50), 0.5)
    assert t.bound_l == pytest.approx(13.0, abs=1e-12)
    assert t.bound_m == pytest.approx(0.5, abs=1e-12)


def test_logistic_single_row_is_singular():
    with pytest.raises(DegeneratePriorError):
        make_logistic_target([[1, 1]], [1], 0.5)
    t = make_logistic_target([[1, 1]], [1], 0.5, allow_singular=True)
    assert t.bound_l == pytest.approx(0.75 * 2.0)
    assert t.bound_m == 0.0


def test_logistic_all_ones_column():
    t = make_logistic_target([[1.0], [1.0]], [1, 0], 0.5)
    assert t.sample_cov[0, 0] == 1.0
    assert t.bound_l == pytest.approx((0.25 * 2 + 0.5) * 1.0)
    assert t.bound_m == pytest.approx(0.5)


def test_logistic_matches_direct_formula(rng):
    x, y = synthesize_logistic_data(30, 3, [0.5, -1.0, 2.0], 3)
    t = make_logistic_target(x, y, 0.7)
    cov = x.T @ x / 30
    for th in rng.normal(0, 1, (10, 3)):
        u = x @ th
        f = -y @ u + np.sum(np.log1p(np.exp(u))) + 0.35 * th @ cov @ th
        g = -x.T @ y + x.T @ (1 / (1 + np.exp(-u))) + 0.7 * cov @ th
        assert t.potential(th) == pytest.approx(f, rel=1e-12)
        np.testing.assert_allclose(t.gradient(th), g, rtol=1e-11, atol=1e-12)


def test_logistic_rejects_bad_data():
    with pytest.raises(ValueError):
        make_logistic_target([[0.5, 1.0]], [1], 0.5)
    with pytest.raises(ValueError):
        make_logistic_target([[1.0, 1.0]], [2], 0.5)
    with pytest.raises(ValueError):
        make_logistic_target([[1.0, 1.0]], [1], 0.0)


def test_synthesized_data_contract():
    x1, y1 = synthesize_logistic_data(50, 2, [1.0, 1.0], 11)
    x2, y2 = synthesize_logistic_data(50, 2, [1.0, 1.0], 11)
    np.testing.assert_array_equal(x1, x2)
    np.testing.assert_array_equal(y1, y2)
    assert set(np.unique(x1)) <= {-1.0, 1.0}
    assert set(np.unique(y1)) <= {0.0, 1.0}


def test_synthesized_labels_follow_logit():
    x, y = synthesize_logistic_data(200_000, 2, [0.0, 0.0], 1)
    assert abs(y.mean() - 0.5) < 5 * 0.5 / math.sqrt(y.size)
    assert abs(x.mean()) < 5 / math.sqrt(x.size)

def test_label_fraction_matches_binomial():
    # With theta* = (1, 1) the label is a fair coin marginally, so the count of
    # ones among 50 rows is Binomial(50, 1/2) and P(fraction >= 0.4) = 0.9405.
    exact = binom.sf(19, 50, 0.5)
    hits = [synthesize_logistic_data(50, 2, [1.0, 1.0], s)[1].mean() >= 0.4 for s in range(2000)]
    assert abs(np.mean(hits) - exact) < 5 * math.sqrt(exact * (1 - exact) / 2000)


# Properties.

@pytest.mark.parametrize("name", sorted(TARGETS))
def test_gradient_matches_finite_differences(name):
    t = TARGETS[name]
    pts = np.random.default_rng(5).normal(0, 2, (100, t.dim))
    for x in pts:
        g = t.gradient(x)
        assert np.linalg.norm(g - _fd(t, x)) <= 1e-5 * (1 + np.linalg.norm(g))


@given(th=st.floats(0, 2 * math.pi), x=arrays(np.float64, 2, elements=st.floats(-50, 50)))
def test_rotated_quadratic_equals_modal_form(th, x):
    p = _rotation(th)
    rotated = QuadraticTarget([5.0, 0.2], p)
    plain = QuadraticTarget([5.0, 0.2])
    assert rotated.potential(x) == pytest.approx(plain.potential(p.T @ x), rel=1e-12, abs=1e-12)


@given(alpha=arrays(np.float64, 3, elements=st.floats(-4, 4)),
       x=arrays(np.float64, 3, elements=st.floats(-1e3, 1e3)))
def test_mixture_symmetry_is_exact(alpha, x):
    t = MixtureTarget(alpha)
    assert t.potential(-x) == t.potential(x)
    np.testing.assert_array_equal(t.gradient(-x), -t.gradient(x))


@settings(max_examples=50)
@given(seed=st.integers(0, 2 ** 32), lam=st.floats(0, 1))
def test_logistic_is_midpoint_convex(seed, lam):
    t = TARGETS["logistic"]
    u, v = np.random.default_rng(seed).normal(0, 3, (2, 2))
    mid = t.potential(lam * u + (1 - lam) * v)
    assert mid <= lam * t.potential(u) + (1 - lam) * t.potential(v) + 1e-12 * (1 + abs(mid))
