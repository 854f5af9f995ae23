import numpy as np
import pytest
from numpy.polynomial import polynomial as poly
from scipy.constants import hbar

from ioncavity.crystal import critical_frequency, find_equilibrium, hessian_v_total, linear_chain_seed
from ioncavity.linearized import (UnstableConfigurationError, build_drift, characteristic_residual, couplings,
                                  drift_matrix, normal_modes, stability_report, zigzag_mode_index)
from ioncavity.params import MHZ, SystemParams, grad_u0

DECOUPLED_BY_SYMMETRY = [0, 2, 5, 6]  # zero-based; modes 1, 3, 6 and 7


def free_chain(n, **kw):
    p = SystemParams(n_ions=n, eta=0.0, **kw)
    return p, find_equilibrium(p, linear_chain_seed(p))


def test_single_ion_frequencies_are_trap_frequencies():
    p, eq = free_chain(1)
    modes = normal_modes(p, eq)
    assert np.allclose(modes.frequencies, [p.omega_y, p.omega_x], rtol=1e-12)


def test_two_ion_modes():
    p, eq = free_chain(2)
    w = normal_modes(p, eq).frequencies
    wx, wy = p.omega_x, p.omega_y
    expected = sorted([wy, np.sqrt(3) * wy, wx, np.sqrt(wx ** 2 - wy ** 2)])
    assert np.allclose(w, expected, rtol=1e-9)


def test_zigzag_mode_frequency_vanishes_at_critical_trap_frequency():
    p, eq = free_chain(4)
    modes = normal_modes(p, eq)
    zz = zigzag_mode_index(modes, eq)
    wc = critical_frequency(p)
    assert modes.frequencies[zz] == pytest.approx(np.sqrt(p.omega_x ** 2 - wc ** 2), rel=1e-7)


def test_mode_set_of_four_ion_zigzag(symmetric_c3):
    s = symmetric_c3
    m = s.modes
    assert m.n_modes == 8
    assert np.all(np.diff(m.frequencies) >= 0)
    assert np.allclose(m.mode_matrix.T @ m.mode_matrix, np.eye(8), atol=1e-12)
    hess = hessian_v_total(s.params, s.eq.positions, fixed_field=True)
    assert np.allclose(hess @ m.mode_matrix, m.mode_matrix * (s.params.ion_mass * m.frequencies ** 2),
                       rtol=0, atol=1e-9 * np.max(np.abs(hess)))


def test_coupling_bounds_and_symmetry_zeros(symmetric_c3):
    s = symmetric_c3
    m = s.modes
    grad = np.linalg.norm(grad_u0(s.params, s.eq.positions))
    bound = np.sqrt(hbar / (2 * s.params.ion_mass * m.frequencies)) * grad
    assert np.all(np.abs(m.couplings) <= bound * (1 + 1e-12))
    big = np.max(np.abs(m.couplings))
    assert np.all(np.abs(m.couplings[DECOUPLED_BY_SYMMETRY]) < 1e-6 * big)
    coupled = np.setdiff1d(np.arange(8), DECOUPLED_BY_SYMMETRY)
    assert np.all(np.abs(m.couplings[coupled]) > 1e-3 * big)


def test_ions_at_nodes_do_not_couple():
    p = SystemParams(n_ions=3)
    r = linear_chain_seed(p)
    r[:, 0] = np.pi / 2 / p.k
    c = couplings(p, r, np.eye(6), np.full(6, p.omega_y))
    r[:, 0] = np.pi / 4 / p.k
    steepest = couplings(p, r, np.eye(6), np.full(6, p.omega_y))
    assert np.all(np.abs(c) < 1e-12 * np.max(np.abs(steepest)))
    with pytest.raises(ValueError):
        couplings(p, r, np.eye(6), np.zeros(6))


def test_reflection_preserves_spectrum_and_coupling_magnitudes(symmetric_c3):
    s = symmetric_c3
    mirror = s.eq.mirrored()
    mm = normal_modes(s.params, mirror)
    assert np.allclose(mm.frequencies, s.modes.frequencies, rtol=1e-10)
    scale = np.max(np.abs(s.modes.couplings))
    assert np.allclose(np.abs(mm.couplings), np.abs(s.modes.couplings), rtol=0, atol=1e-7 * scale)
    # reflected mode vectors (x rows negated) give identical couplings in the mirrored crystal
    v = s.modes.mode_matrix.copy()
    v[0::2] *= -1
    c_reflected = couplings(s.params, mirror, v, s.modes.frequencies)
    assert np.allclose(c_reflected, s.modes.couplings, rtol=0, atol=1e-9 * scale)
    # without transforming the modes, only the transverse part of the overlap changes sign
    grad = grad_u0(s.params, s.eq.positions).ravel()
    grad_m = grad_u0(s.params, mirror.positions).ravel()
    assert np.allclose(grad_m[0::2], -grad[0::2], rtol=1e-12)
    assert np.allclose(grad_m[1::2], grad[1::2], rtol=1e-12)


def test_drift_without_field_is_block_diagonal():
    w = np.array([1.0, 2.0, 3.0])
    g = np.array([0.01, 0.02, 0.03])
    d = build_drift(0.7, -0.4, 0.0, w, g, [0.2, 0.3, 0.4], [0.0, 1.0, 2.0])
    lam = np.sort_complex(np.linalg.eigvals(d.M))
    expected = np.sort_complex(np.concatenate([[-0.7 + 0.4j, -0.7 - 0.4j], -g + 1j * w, -g - 1j * w]))
    assert np.allclose(lam, expected, atol=1e-14)
    assert np.allclose(np.diag(d.D), [1.4, 1.4, 0.02, 0.02, 0.12, 0.12, 0.3, 0.3])


def test_drift_trace_and_conjugate_pairs(symmetric_c3):
    d = symmetric_c3.drift
    assert np.trace(d.M) == pytest.approx(-2 * d.kappa - 2 * np.sum(d.heating_rates), rel=1e-12)
    lam = np.linalg.eigvals(d.M)
    assert np.allclose(np.sort_complex(lam), np.sort_complex(lam.conj()), atol=1e-9 * d.kappa)


def test_single_mode_eigenvalues_match_quartic_roots():
    kappa, delta, a, w, g, c = 1.0, -0.8, 0.6, 1.3, 0.05, 0.4
    d = build_drift(kappa, delta, a, [w], [g], [c], [0.0])
    # (Delta^2 + (kappa + l)^2)(w^2 + (l + g)^2) + 4 Delta a^2 c^2 w = 0
    cav = poly.polyadd([delta ** 2], poly.polypow([kappa, 1.0], 2))
    mech = poly.polyadd([w ** 2], poly.polypow([g, 1.0], 2))
    quartic = poly.polyadd(poly.polymul(cav, mech), [4 * delta * a ** 2 * c ** 2 * w])
    roots = np.sort_complex(poly.polyroots(quartic))
    lam = np.sort_complex(np.linalg.eigvals(d.M))
    assert np.allclose(lam, roots, atol=1e-10)
    for x in lam:
        assert characteristic_residual(x, kappa, delta, a, np.array([w]), np.array([g]), np.array([c])) < 1e-10


def test_stability_report_for_operating_point(symmetric_c3):
    rep = stability_report(symmetric_c3.drift)
    assert rep.stable and rep.inequality_holds
    assert rep.max_real_part < 0
    assert rep.band_ok
    finite = rep.residuals[np.isfinite(rep.residuals)]
    assert len(finite) >= 2 and np.all(finite < 1e-6)


def test_stability_report_detects_instability():
    w, g, c = np.array([1.0]), np.array([0.01]), np.array([0.5])
    stable = stability_report(build_drift(1.0, -1.0, 0.3, w, g, c, [0.0]))
    assert stable.stable and stable.inequality_holds
    unstable = stability_report(build_drift(1.0, -1.0, 3.0, w, g, c, [0.0]))
    assert not unstable.stable and unstable.inequality_holds is False
    blue = stability_report(build_drift(1.0, 1.0, 0.1, w, g, c, [0.0]))
    assert blue.inequality_holds is None


def test_saddle_configuration_has_no_normal_modes():
    p = SystemParams(n_ions=4, eta=0.0, omega_x=1.9 * MHZ)
    with pytest.raises(UnstableConfigurationError) as info:
        normal_modes(p, linear_chain_seed(p))
    assert info.value.eigenvalue < 0


def test_drift_uses_configuration_mean_field(symmetric_c3):
    s = symmetric_c3
    d = drift_matrix(s.params, s.eq, s.modes)
    assert d.delta_eff == s.eq.mean_field.delta_eff and d.a_bar == s.eq.mean_field.a_bar
    assert d.basis[:4] == ["Q_a", "P_a", "Q_1", "P_1"]
