"""Normal modes, cavity-motion couplings and the drift matrix of the fluctuations.

Quadrature ordering is (Q_a, P_a, Q_1, P_1, ..., Q_2N, P_2N) with
Q = (b + b^dag)/sqrt(2), P = i(b^dag - b)/sqrt(2) and likewise for the field.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.constants import hbar

from .crystal import CrystalConfiguration, hessian_v_total
from .params import MeanField, SystemParams, bose_occupation, grad_u0

DEGENERACY_TOL = 1e-9  # relative to omega_y
STABILITY_TOL = 1e-9  # Re(lambda) / kappa
DEFECTIVE_COND = 1e8


class UnstableConfigurationError(ValueError):
    def __init__(self, message, mode_index=None, eigenvalue=None):
        super().__init__(message)
        self.mode_index = mode_index
        self.eigenvalue = eigenvalue


class StabilityInconsistencyError(RuntimeError):
    pass


class DefectiveMatrixError(ValueError):
    pass


@dataclass
class NormalModeSet:
    frequencies: np.ndarray  # rad/s, ascending
    mode_matrix: np.ndarray  # (2N, 2N), rows x1, y1, x2, ...; columns modes
    couplings: np.ndarray  # c_n, rad/s
    heating_rates: np.ndarray  # Gamma_n, 1/s
    bath_occupations: np.ndarray  # Nbar_n

    @property
    def n_modes(self) -> int:
        return len(self.frequencies)

    def rows(self):
        return [(n + 1, w / (2 * np.pi), c, g, nb) for n, (w, c, g, nb) in
                enumerate(zip(self.frequencies, self.couplings, self.heating_rates, self.bath_occupations))]


@dataclass
class DriftSystem:
    M: np.ndarray
    D: np.ndarray
    kappa: float
    delta_eff: float
    a_bar: float
    frequencies: np.ndarray
    heating_rates: np.ndarray
    couplings: np.ndarray
    bath_occupations: np.ndarray

    @property
    def basis(self):
        labels = ["Q_a", "P_a"]
        for n in range(len(self.frequencies)):
            labels += [f"Q_{n + 1}", f"P_{n + 1}"]
        return labels

    def to_json(self) -> str:
        return json.dumps({"basis": self.basis, "M": self.M.tolist(), "D": self.D.tolist(),
                           "kappa": self.kappa, "delta_eff": self.delta_eff, "a_bar": self.a_bar}, indent=2)


def _fix_sign(v, c):
    if abs(c) > 0:
        return -1.0 if c < 0 else 1.0
    big = np.flatnonzero(np.abs(v) > 1e-8 * np.max(np.abs(v)))
    return -1.0 if v[big[0]] < 0 else 1.0


def couplings(params: SystemParams, configuration, modes_or_matrix, frequencies=None) -> np.ndarray:
    """c_n = sqrt(hbar / (2 m omega_n)) * (mode vector . grad U_0) at the equilibrium."""
    if isinstance(modes_or_matrix, NormalModeSet):
        matrix, frequencies = modes_or_matrix.mode_matrix, modes_or_matrix.frequencies
    else:
        matrix = modes_or_matrix
    frequencies = np.asarray(frequencies, dtype=float)
    if np.any(frequencies <= 0):
        raise ValueError("mode frequencies must be positive")
    positions = configuration.positions if isinstance(configuration, CrystalConfiguration) else configuration
    grad = grad_u0(params, positions).ravel()
    return np.sqrt(hbar / (2 * params.ion_mass * frequencies)) * (matrix.T @ grad)


def normal_modes(params: SystemParams, configuration: CrystalConfiguration) -> NormalModeSet:
    """Crystal modes in the optical potential with the cavity amplitude held at its mean value.

    Degenerate frequencies are rotated so at most one combination in each
    degenerate subspace couples to the cavity.
    """
    positions = configuration.positions if isinstance(configuration, CrystalConfiguration) else configuration
    m = params.ion_mass
    hess = hessian_v_total(params, positions, fixed_field=True)
    hess = 0.5 * (hess + hess.T)
    evals, vecs = np.linalg.eigh(hess)
    if evals[0] <= 0:
        raise UnstableConfigurationError(
            f"Hessian eigenvalue {evals[0]:.3g} J/m^2 <= 0: not a potential minimum", 0, float(evals[0]))
    omegas = np.sqrt(evals / m)
    grad = grad_u0(params, positions).ravel()

    tol = DEGENERACY_TOL * params.omega_y
    start = 0
    while start < len(omegas):
        stop = start + 1
        while stop < len(omegas) and omegas[stop] - omegas[stop - 1] < tol:
            stop += 1
        if stop - start > 1:
            sub = vecs[:, start:stop]
            proj = sub.T @ grad
            if np.linalg.norm(proj) > 0:
                basis = np.column_stack([proj, np.eye(len(proj))])
                q, _ = np.linalg.qr(basis)
                vecs[:, start:stop] = sub @ q[:, :len(proj)]
        start = stop

    c = np.sqrt(hbar / (2 * m * omegas)) * (vecs.T @ grad)
    for n in range(len(omegas)):
        s = _fix_sign(vecs[:, n], c[n] if abs(c[n]) > 1e-12 * np.max(np.abs(c), initial=1e-300) else 0.0)
        vecs[:, n] *= s
        c[n] *= s
    gammas = params.heating_rate_array(len(omegas))
    nbar = bose_occupation(omegas, params.bath_temperature)
    return NormalModeSet(omegas, vecs, c, gammas, np.asarray(nbar, dtype=float))


def build_drift(kappa, delta_eff, a_bar, frequencies, heating_rates, couplings_, bath_occupations) -> DriftSystem:
    """Assemble M and D from scalar cavity data and per-mode arrays."""
    w = np.asarray(frequencies, dtype=float)
    g = np.asarray(heating_rates, dtype=float)
    c = np.asarray(couplings_, dtype=float)
    nb = np.asarray(bath_occupations, dtype=float)
    n = len(w)
    dim = 2 * (n + 1)
    M = np.zeros((dim, dim))
    D = np.zeros((dim, dim))
    # M_a = -kappa I - i Delta sigma_y
    M[0:2, 0:2] = [[-kappa, -delta_eff], [delta_eff, -kappa]]
    D[0, 0] = D[1, 1] = 2 * kappa
    for j in range(n):
        i = 2 * (j + 1)
        # M_n = -Gamma I + i omega sigma_y
        M[i:i + 2, i:i + 2] = [[-g[j], w[j]], [-w[j], -g[j]]]
        # A_n = -a c (sigma_x - i sigma_y): only the lower-left entry, -2 a c
        M[i + 1, 0] = -2 * a_bar * c[j]
        M[1, i] = -2 * a_bar * c[j]
        D[i, i] = D[i + 1, i + 1] = 2 * g[j] * (2 * nb[j] + 1)
    return DriftSystem(M, D, float(kappa), float(delta_eff), float(a_bar), w, g, c, nb)


def drift_matrix(params: SystemParams, configuration: CrystalConfiguration, modes: NormalModeSet,
                 mean_field: MeanField | None = None) -> DriftSystem:
    mf = mean_field if mean_field is not None else configuration.mean_field
    return build_drift(params.kappa, mf.delta_eff, mf.a_bar, modes.frequencies, modes.heating_rates,
                       modes.couplings, modes.bath_occupations)


def characteristic_residual(lam, kappa, delta_eff, a_bar, w, g, c):
    """Relative residual of lambda in the cavity eigenvalue equation."""
    lhs = delta_eff ** 2 + (kappa + lam) ** 2
    terms = -4 * delta_eff * a_bar ** 2 * c ** 2 * w / (w ** 2 + (lam + g) ** 2)
    rhs = np.sum(terms)
    scale = max(abs(delta_eff) ** 2, abs(kappa + lam) ** 2, np.max(np.abs(terms), initial=0.0), 1e-300)
    return abs(lhs - rhs) / scale


@dataclass
class StabilityReport:
    eigenvalues: np.ndarray
    stable: bool
    max_real_part: float
    inequality_lhs: float
    inequality_rhs: float
    inequality_holds: bool | None  # None when Delta_eff >= 0
    residuals: np.ndarray  # NaN for eigenvalues of modes decoupled from the cavity
    band_ok: bool
    eigenvector_condition: float


def stability_report(drift: DriftSystem, params: SystemParams | None = None, modes=None, mean_field=None,
                     check_consistency: bool = True) -> StabilityReport:
    """Numerical eigenvalues of M checked against the analytic stability criteria.

    For Delta_eff < 0 the inequality Delta^2 + kappa^2 >= -4 Delta a^2 sum c^2 w/(w^2+G^2)
    is necessary and sufficient; a disagreement with the numerical verdict
    (outside a 1e-6 relative margin) raises StabilityInconsistencyError.
    """
    kappa, delta, a = drift.kappa, drift.delta_eff, drift.a_bar
    w, g, c = drift.frequencies, drift.heating_rates, drift.couplings
    evals, evecs = np.linalg.eig(drift.M)
    max_re = float(np.max(evals.real))
    stable = max_re < STABILITY_TOL * kappa

    lhs = delta ** 2 + kappa ** 2
    rhs = float(-4 * delta * a ** 2 * np.sum(c ** 2 * w / (w ** 2 + g ** 2)))
    holds = bool(lhs >= rhs) if delta < 0 else None
    if check_consistency and holds is not None and abs(lhs - rhs) > 1e-6 * lhs and holds != stable:
        raise StabilityInconsistencyError(
            f"inequality says stable={holds} but max Re(lambda) = {max_re:.3g}")

    norms = np.linalg.norm(evecs, axis=0)
    cavity_weight = np.linalg.norm(evecs[:2], axis=0) / norms
    residuals = np.full(len(evals), np.nan)
    band_ok = True
    lo = -max(kappa, np.max(g, initial=kappa))
    hi = -min(kappa, np.min(g, initial=kappa))
    for i, lam in enumerate(evals):
        if cavity_weight[i] < 1e-9:
            continue
        residuals[i] = characteristic_residual(lam, kappa, delta, a, w, g, c)
        if delta < 0 and abs(lam.imag) > 1e-9 * kappa:
            slack = 1e-9 * kappa
            if not (lo - slack <= lam.real <= hi + slack):
                band_ok = False
    cond = float(np.linalg.cond(evecs))
    return StabilityReport(evals, bool(stable), max_re, float(lhs), rhs, holds, residuals, band_ok, cond)


def zigzag_mode_index(modes: NormalModeSet, configuration) -> int:
    """Mode with the largest overlap with the alternating transverse pattern."""
    positions = configuration.positions if isinstance(configuration, CrystalConfiguration) else configuration
    n = len(positions)
    pattern = np.zeros(2 * n)
    pattern[0::2] = (-1.0) ** np.arange(n)
    pattern /= np.linalg.norm(pattern)
    return int(np.argmax(np.abs(modes.mode_matrix.T @ pattern)))
