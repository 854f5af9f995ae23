import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from conftest import four_ion_params
from ioncavity.crystal import find_equilibrium, grad_v_total, linear_chain_seed, v_total
from ioncavity.linearized import build_drift, characteristic_residual, normal_modes, stability_report
from ioncavity.params import SystemParams, with_power
from ioncavity.softmode import threshold_power, v_s_uniform
from ioncavity.steadystate import log_negativity, solve_covariance, symplectic_eigenvalues

P4 = with_power(four_ion_params(3.0, offset=0.2), 0.15)
LIN = linear_chain_seed(P4)


@st.composite
def drift_systems(draw, n_modes=None, stable_only=False):
    """Random cavity + motion drift in units of kappa, red-detuned."""
    n = draw(st.integers(1, 4)) if n_modes is None else n_modes
    w = np.array(draw(st.lists(st.floats(1.0, 3.0), min_size=n, max_size=n)))
    # degenerate modes leave a decoupled combination (normal_modes rotates those apart)
    assume(n == 1 or np.min(np.diff(np.sort(w))) > 0.02)
    g = np.array(draw(st.lists(st.floats(1e-3, 0.1), min_size=n, max_size=n)))
    # |c| bounded away from 0 so every pole involves the cavity equation
    c = np.array(draw(st.lists(st.floats(0.05, 0.5), min_size=n, max_size=n)))
    c = c * np.array(draw(st.lists(st.sampled_from([-1.0, 1.0]), min_size=n, max_size=n)))
    nb = np.array(draw(st.lists(st.floats(0.0, 20.0), min_size=n, max_size=n)))
    delta = draw(st.floats(-3.0, -0.05))
    a = draw(st.floats(0.1, 3.0 if not stable_only else 1.0))
    d = build_drift(1.0, delta, a, w, g, c, nb)
    if stable_only:
        assume(np.max(np.linalg.eigvals(d.M).real) < -1e-3)
    return d


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1.0, 1.0), min_size=8, max_size=8))
def test_gradient_matches_central_differences(u):
    # near the equilibrium the force is tiny and differences measure roundoff only
    assume(np.linalg.norm(u) > 0.1)
    r = LIN + np.array(u).reshape(4, 2) * [2 / P4.k, 0.3e-6]
    g = grad_v_total(P4, r)
    fd = np.zeros_like(r)
    for idx in np.ndindex(r.shape):
        h = 1e-11 if idx[1] == 0 else 1e-10
        rp, rm = r.copy(), r.copy()
        rp[idx] += h
        rm[idx] -= h
        fd[idx] = (v_total(P4, rp) - v_total(P4, rm)) / (2 * h)
    assert np.linalg.norm(fd - g) < 1e-6 * np.linalg.norm(g)


@settings(max_examples=100, deadline=None)
@given(drift_systems())
def test_trace_identity(d):
    expected = -2 * (d.kappa + np.sum(d.heating_rates))
    assert abs(np.trace(d.M) - expected) <= 1e-12 * abs(expected)


@settings(max_examples=100, deadline=None)
@given(drift_systems())
def test_inequality_agrees_with_eigenvalues(d):
    rep = stability_report(d, check_consistency=False)
    assume(abs(rep.inequality_lhs - rep.inequality_rhs) > 1e-6 * rep.inequality_lhs)
    assert rep.inequality_holds == rep.stable
    for lam in rep.eigenvalues:
        assert characteristic_residual(lam, d.kappa, d.delta_eff, d.a_bar, d.frequencies, d.heating_rates,
                                       d.couplings) < 1e-8


@settings(max_examples=60, deadline=None)
@given(drift_systems(stable_only=True))
def test_covariance_is_physical_and_accurate(d):
    res = solve_covariance(d)
    assert res.lyapunov_residual < 1e-9
    assert np.allclose(res.covariance, res.covariance.T)
    assert symplectic_eigenvalues(res.covariance).min() >= 1 - 1e-8
    assert np.all(res.occupations >= -1e-9)


@settings(max_examples=40, deadline=None)
@given(drift_systems(n_modes=2, stable_only=True), st.lists(st.floats(0, 2 * np.pi), min_size=3, max_size=3))
def test_negativity_invariant_under_local_rotations(d, phases):
    cov = solve_covariance(d).covariance
    s = np.zeros_like(cov)
    for j, phi in enumerate(phases):
        s[2 * j:2 * j + 2, 2 * j:2 * j + 2] = [[np.cos(phi), -np.sin(phi)], [np.sin(phi), np.cos(phi)]]
    rotated = s @ cov @ s.T
    for party in ("all", [1], [2]):
        assert abs(log_negativity(rotated, party) - log_negativity(cov, party)) < 1e-9


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 1.0), st.floats(0.0, 1.0), st.floats(0.0, 10.0), st.floats(0.0, 3 * np.pi))
def test_uniform_soft_mode_potential_is_even(theta, P, C, kb):
    p = SystemParams()
    v, vm = v_s_uniform(kb / p.k, theta, P, C, p), v_s_uniform(-kb / p.k, theta, P, C, p)
    assert abs(v - vm) <= 1e-13 * abs(v)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 1.0), st.floats(0.01, 100.0))
def test_threshold_never_below_half_theta(theta, C):
    assert threshold_power(theta, C) >= theta / 2 * (1 - 1e-14)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.0, 0.6), st.floats(-0.4, 0.4))
def test_mode_matrix_orthonormal(power, offset):
    p = with_power(four_ion_params(0.3, offset=offset), power)
    eq = find_equilibrium(p, linear_chain_seed(p), escape_saddle=True)
    modes = normal_modes(p, eq)
    v = modes.mode_matrix
    assert np.max(np.abs(v.T @ v - np.eye(len(v)))) < 1e-10
