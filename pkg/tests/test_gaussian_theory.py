import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaul.dynamics import DynamicsParams, a_star, gamma_star, step_size
from gaul.errors import DivergenceError, InstabilityError, NoFixedPointError
from gaul.gaussian_theory import (BlockCovariance, FixedPointCovariance, continuous_eigenvalues,
                                  covariance_closed_form, covariance_rhs, discrete_eigenvalues,
                                  discrete_map, eigen_system, fixed_point_covariance,
                                  integrate_covariance, iterate_covariance, mixing_rates,
                                  mode_matrix, spectral_bound_check, ul_step_limit)


def _lyapunov_residual(fp, dmap, i):
    y = np.array([[fp.y11[i], fp.y12[i]], [fp.y12[i], fp.y22[i]]])
    a = dmap.matrix(i)
    return np.linalg.norm(y - a @ y @ a.T - dmap.noise_cov())


def test_rhs_vanishes_at_stationary_state():
    s = np.array([0.5, 2.0, 7.0])
    rhs = covariance_rhs(BlockCovariance.stationary(s), DynamicsParams(a=0.7, gamma=1.3), s)
    for v in (rhs.sig11, rhs.sig22, rhs.sig12):
        np.testing.assert_allclose(v, 0.0, atol=1e-15)


def test_rhs_examples():
    rhs = covariance_rhs(BlockCovariance.identity(1), DynamicsParams(a=1, gamma=1), [4.0])
    assert rhs.sig11[0] == -6.0
    rhs = covariance_rhs(BlockCovariance([3.0], [1.0], [0.0]), DynamicsParams(a=0.2, gamma=5), [1.0])
    assert rhs.sig22[0] == 0.0


def test_rhs_matches_dense_lyapunov(rng):
    d = 3
    s = rng.uniform(0.5, 5, d)
    c = rng.uniform(0.5, 2, d)
    params = DynamicsParams(a=3, gamma=3, precond=tuple(c))
    sig = BlockCovariance(rng.uniform(0.5, 2, d), rng.uniform(0.5, 2, d), rng.uniform(-0.2, 0.2, d))
    q = np.block([[np.diag(3 * c), np.diag(-c)], [np.eye(d), 3 * np.eye(d)]])
    hess = np.block([[np.diag(s), np.zeros((d, d))], [np.zeros((d, d)), np.eye(d)]])
    b = q @ hess
    dense = sig.dense()
    expect = -b @ dense - dense @ b.T + (q + q.T)
    got = covariance_rhs(sig, params, s).dense()
    np.testing.assert_allclose(got, expect, atol=1e-12)


def test_integrate_zero_time_returns_initial():
    sig0 = BlockCovariance([2.0], [0.5], [0.1])
    traj = integrate_covariance(sig0, DynamicsParams(a=1, gamma=2), [1.0], 0.0, 1e-3)
    assert traj.final.sig11[0] == 2.0 and traj.final.sig22[0] == 0.5 and traj.final.sig12[0] == 0.1


def test_integrate_underdamped_relaxes():
    params = DynamicsParams(a=0, gamma=2, method="underdamped")
    traj = integrate_covariance(BlockCovariance.identity(1), params, [1.0], 10.0, 1e-3)
    assert abs(traj.final.sig11[0] - 1.0) < 1e-6
    ref = covariance_closed_form(BlockCovariance([4.0], [0.25], [0.0]), params, [1.0], 10.0)
    assert abs(ref.sig11[0] - 1.0) < 1e-6 and abs(ref.sig22[0] - 1.0) < 1e-6


def test_integrate_rejects_non_diagonal_blocks():
    m = np.eye(4)
    m[0, 1] = m[1, 0] = 0.1
    with pytest.raises(ValueError):
        integrate_covariance(m, DynamicsParams(a=1, gamma=1), [1.0, 2.0], 1.0, 1e-3)


def test_integrate_reports_instability():
    # A huge step makes RK4 explode and leave the PSD cone.
    with pytest.raises(InstabilityError):
        integrate_covariance(BlockCovariance.identity(1), DynamicsParams(a=1, gamma=120),
                             [100.0], 10.0, 0.1)


def test_integrate_matches_closed_form(rng):
    for _ in range(5):
        d = 2
        s = rng.uniform(0.1, 10, d)
        a = rng.uniform(0, 2)
        params = DynamicsParams(a=a, gamma=gamma_star(a, s.min()))
        dt = 1e-3 / (a * s.max() + params.gamma)
        sig0 = BlockCovariance(rng.uniform(0.5, 2, d), rng.uniform(0.5, 2, d), np.zeros(d))
        got = integrate_covariance(sig0, params, s, 1.0, dt).final
        ref = covariance_closed_form(sig0, params, s, 1.0)
        assert np.abs(got.dense() - ref.dense()).max() < 1e-8


def test_mode_matrix_example():
    np.testing.assert_array_equal(mode_matrix(0, 2, 1), [[0, -4, -1], [0, 0, 1], [2, -10, -6]])


def test_continuous_eigenvalue_examples():
    sp = continuous_eigenvalues(1, 3, 1)
    assert sp.defective and sp.lam0 == sp.lam_plus == sp.lam_minus == -4
    np.testing.assert_allclose(np.linalg.eigvals(mode_matrix(1, 3, 1)), -4, atol=1e-4)
    sp = continuous_eigenvalues(0, 2, 1)
    assert sp.defective and sp.lam0 == -2
    sp = continuous_eigenvalues(0, 1, 1)
    assert sp.lam_plus == pytest.approx(-1 + 1j * math.sqrt(3), abs=1e-15)
    assert sp.lam_minus == pytest.approx(-1 - 1j * math.sqrt(3), abs=1e-15)


@given(a=st.floats(0, 3), gamma=st.floats(0.01, 10), s=st.floats(0.01, 100))
def test_eigenvalue_ordering(a, gamma, s):
    sp = continuous_eigenvalues(a, gamma, s)
    assert sp.lam_plus.real >= sp.lam0.real >= sp.lam_minus.real
    if sp.defective:
        assert abs(sp.lam_plus - sp.lam_minus) <= 1e-9


def test_eigenvectors_solve_mode_matrix(rng):
    for _ in range(200):
        a, gamma, s = rng.uniform(0, 3), rng.uniform(0.1, 10), rng.uniform(0.05, 20)
        sp = continuous_eigenvalues(a, gamma, s)
        if abs(sp.discriminant) < 1e-6:
            continue
        vec = eigen_system(a, gamma, [s])[0]
        dm = mode_matrix(a, gamma, s)
        for lam, v in ((sp.lam0, vec.v0), (sp.lam_minus, vec.v_minus), (sp.lam_plus, vec.v_plus)):
            assert v[2] == 1
            res = np.linalg.norm(dm @ v - lam * v)
            assert res <= 1e-9 * max(1.0, np.linalg.norm(dm) * np.linalg.norm(v))


@pytest.mark.parametrize("a,sd", [(1.0, 1.0), (0.0, 0.25), (2.0, 4.0), (0.3, 0.01)])
def test_jordan_chain_at_critical_damping(a, sd):
    gamma = gamma_star(a, sd)
    vec = eigen_system(a, gamma, [sd])[0]
    lam = continuous_eigenvalues(a, gamma, sd).lam0.real
    n = mode_matrix(a, gamma, sd) - lam * np.eye(3)
    scale = np.linalg.norm(n)
    assert np.linalg.norm(n @ vec.v0) <= 1e-9 * scale * np.linalg.norm(vec.v0)
    assert np.linalg.norm(n @ vec.eta - vec.v0) <= 1e-9 * scale * np.linalg.norm(vec.eta)
    assert np.linalg.norm(n @ vec.xi - vec.eta) <= 1e-9 * scale * np.linalg.norm(vec.xi)
    assert np.linalg.matrix_rank(np.column_stack([vec.v0, vec.eta, vec.xi])) == 3


def test_jordan_chain_on_lower_critical_branch():
    # gamma = a s - 2 sqrt(s) is the other root of the discriminant.
    s, gamma = 1.0, 3.0
    a = (gamma + 2.0 * math.sqrt(s)) / s
    assert continuous_eigenvalues(a, gamma, s).defective
    vec = eigen_system(a, gamma, [s])[0]
    n = mode_matrix(a, gamma, s) - continuous_eigenvalues(a, gamma, s).lam0.real * np.eye(3)
    np.testing.assert_allclose(n @ vec.eta, vec.v0, atol=1e-9)
    np.testing.assert_allclose(n @ vec.xi, vec.eta, atol=1e-9)


def test_naive_chain_vectors_only_span_a_plane():
    # The sparse guesses ((gamma - as)/(2 s^2), 0, 1) and ((gamma^2 - (1 + a gamma) s)/s^2, 1, 0)
    # are mapped onto multiples of v0, so they cannot complete a Jordan basis.
    a, s = 1.0, 1.0
    gamma = gamma_star(a, s)
    vec = eigen_system(a, gamma, [s])[0]
    n = mode_matrix(a, gamma, s) + 4.0 * np.eye(3)
    eta = np.array([(gamma - a * s) / (2 * s * s), 0.0, 1.0])
    xi = np.array([(gamma ** 2 - (1 + a * gamma) * s) / s ** 2, 1.0, 0.0])
    assert np.linalg.norm(n @ eta - vec.v0) > 1e-3
    assert np.linalg.matrix_rank(np.column_stack([n @ eta, n @ xi, vec.v0]), tol=1e-9) == 1


def test_mode_supports_are_disjoint():
    vecs = eigen_system(0.5, 2.0, [1.0, 3.0, 5.0])
    d = 3
    supports = [set(np.flatnonzero(vecs[i].embed(vecs[i].v0, i, d))) for i in range(d)]
    for i in range(d):
        for j in range(i + 1, d):
            assert not supports[i] & supports[j]


def test_discrete_map_examples():
    m = discrete_map(1, 3, 0.1, [1.0])
    np.testing.assert_allclose(m.matrix(0), [[0.9, 0.1], [-0.1, 0.7]], atol=1e-15)
    np.testing.assert_allclose(m.noise_cov(), np.diag([0.2, 0.6]), atol=1e-15)
    z = discrete_map(1, 3, 0.0, [1.0, 5.0])
    for i in range(2):
        np.testing.assert_array_equal(z.matrix(i), np.eye(2))


def test_discrete_eigenvalue_examples(rng):
    plus, minus = discrete_eigenvalues(1, 3, 0.1, 1)
    assert plus == pytest.approx(0.2, abs=1e-15) and minus == pytest.approx(0.2, abs=1e-15)
    plus, minus = discrete_eigenvalues(0, 4, 0.3, 4)
    assert plus == minus == pytest.approx(0.3 * 2)
    for _ in range(100):
        a, g, h, s = rng.uniform(0, 3), rng.uniform(0.1, 10), rng.uniform(1e-3, 0.5), rng.uniform(0.1, 20)
        m = discrete_map(a, g, h, [s])
        numeric = np.sort_complex(np.linalg.eigvals(np.eye(2) - m.matrix(0)))
        closed = np.sort_complex(np.array(discrete_eigenvalues(a, g, h, s)))
        np.testing.assert_allclose(numeric, closed, atol=1e-12)


def test_spectral_bound_examples():
    res = spectral_bound_check(1, 3, 1 / 12, 9, 1)
    assert res.admissible and res.bound == pytest.approx(11 / 12, abs=1e-15)
    assert res.max_modulus <= 11 / 12 + 1e-12
    res = spectral_bound_check(1, 3, 0.2, 9, 1)
    assert not res.admissible and "h above" in res.reason
    res = spectral_bound_check(0, 2, 0.01, 9, 1)
    assert not res.admissible and "a below" in res.reason


def test_ul_step_limit_examples():
    assert ul_step_limit(4, 1) == 0.5
    assert ul_step_limit(100, 0.01) == pytest.approx(0.002, abs=1e-18)
    assert step_size("fifth-inverse", s1=100) == pytest.approx(ul_step_limit(100, 0.01))
    with pytest.raises(ValueError):
        ul_step_limit(1, 2)


def test_ul_step_limit_is_critical(rng):
    for _ in range(20):
        sd = rng.uniform(0.01, 1)
        s1 = sd * rng.uniform(1.5, 100)
        h = ul_step_limit(s1, sd)
        rho = discrete_map(0, 2 * math.sqrt(sd), h, [s1, sd]).spectral_radius().max()
        assert abs(rho - 1.0) < 1e-12


def test_fixed_point_reference_value():
    fp = fixed_point_covariance(1, 3, 0.1, [1.0])
    assert fp.y11[0] == pytest.approx(1.0836762688614540, rel=1e-14)
    assert fp.y12[0] == pytest.approx(-0.034293552812071331, rel=1e-13)
    assert fp.y22[0] == pytest.approx(1.2071330589849108, rel=1e-14)
    dmap = discrete_map(1, 3, 0.1, [1.0])
    assert _lyapunov_residual(fp, dmap, 0) <= 1e-12
    it = iterate_covariance(FixedPointCovariance(np.ones(1), np.zeros(1), np.ones(1)), dmap, 2000)
    np.testing.assert_allclose([it.y11[0], it.y12[0], it.y22[0]],
                               [fp.y11[0], fp.y12[0], fp.y22[0]], atol=1e-13)


def test_fixed_point_continuum_limit():
    s = np.array([0.5, 2.0, 10.0])
    fp = fixed_point_covariance(0.5, gamma_star(0.5, 0.5), 1e-7, s)
    np.testing.assert_allclose(fp.y11, 1 / s, rtol=1e-5)
    np.testing.assert_allclose(fp.y12, 0, atol=1e-5)
    np.testing.assert_allclose(fp.y22, 1, rtol=1e-5)


def test_fixed_point_bias_grows_with_step():
    s = 1.0
    limit = ul_step_limit(s, s)
    bias = [abs(fixed_point_covariance(0, 2 * math.sqrt(s), f * limit, [s]).y11[0] - 1 / s)
            for f in (1e-3, 1e-2, 1e-1)]
    assert bias[0] < bias[1] < bias[2]


def test_fixed_point_requires_contraction():
    with pytest.raises(NoFixedPointError):
        fixed_point_covariance(0, 2, 1.5, [4.0])


@settings(max_examples=200)
@given(a=st.floats(0, 3), s=st.floats(0.05, 20), frac=st.floats(0.05, 0.95))
def test_fixed_point_solves_lyapunov(a, s, frac):
    gamma = gamma_star(a, s)
    h = frac / (a * s + gamma)
    fp = fixed_point_covariance(a, gamma, h, [s])
    scale = max(1.0, abs(fp.y11[0]), abs(fp.y22[0]))
    assert _lyapunov_residual(fp, discrete_map(a, gamma, h, [s]), 0) <= 1e-10 * scale


def test_iterate_zero_steps_and_history():
    dmap = discrete_map(1, 3, 0.1, [1.0, 2.0])
    y0 = BlockCovariance([1.0, 2.0], [3.0, 4.0], [0.1, 0.2])
    out = iterate_covariance(y0, dmap, 0)
    np.testing.assert_array_equal(out.y11, [1.0, 2.0])
    np.testing.assert_array_equal(out.y12, [0.1, 0.2])
    out, hist = iterate_covariance(y0, dmap, 5, history=True)
    assert hist.shape == (6, 3, 2)
    np.testing.assert_array_equal(hist[-1, 0], out.y11)


def test_iterate_converges_to_fixed_point():
    s = np.array([1.0, 9.0])
    gamma = gamma_star(1, 1)
    h = 1 / (9 + gamma)
    dmap = discrete_map(1, gamma, h, s)
    fp = fixed_point_covariance(1, gamma, h, s)
    out = iterate_covariance(BlockCovariance.identity(2), dmap, 100000)
    for u, v in ((out.y11, fp.y11), (out.y12, fp.y12), (out.y22, fp.y22)):
        np.testing.assert_allclose(u, v, atol=1e-10)


def test_iterate_overflow_raises():
    dmap = discrete_map(0, 2, 3.0, [100.0])
    with pytest.raises(DivergenceError):
        iterate_covariance(BlockCovariance.identity(1), dmap, 10000)


def test_mixing_rate_examples():
    r = mixing_rates(0, 2, 0.01, 4, 0.25)
    assert r.cont_rate == 1.0
    assert r.disc_rate == pytest.approx(0.0025)
    for s1, sd in ((100, 0.01), (9, 1), (20, 1 / 95.05), (1e4, 1)):
        a = a_star(s1, sd)
        g = gamma_star(a, sd)
        h = step_size("half-inverse", a=a, gamma=g, s1=s1)
        assert mixing_rates(a, g, h, s1, sd).disc_rate >= 1 / (16 * math.sqrt(s1 / sd))
