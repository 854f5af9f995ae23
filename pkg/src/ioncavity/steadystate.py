"""Stationary covariance, mode occupations, cavity output spectrum and entanglement.

Covariances are C_ab = <X_a X_b + X_b X_a>, so the vacuum is the identity.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from .linearized import DEFECTIVE_COND, DefectiveMatrixError, DriftSystem, NormalModeSet
from .params import MeanField, SystemParams

LYAPUNOV_TOL = 1e-9
PHYSICALITY_TOL = 1e-8


class UnstableDriftError(ValueError):
    pass


class UnphysicalCovarianceError(ValueError):
    pass


@dataclass
class SteadyStateResult:
    covariance: np.ndarray
    occupations: np.ndarray  # <b_n^dag b_n>, motional modes only
    lyapunov_residual: float
    cavity_occupation: float = 0.0


@dataclass
class SpectrumSeries:
    nu: np.ndarray  # rad/s
    S: np.ndarray  # s


def symplectic_form(n_modes: int) -> np.ndarray:
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def symplectic_eigenvalues(cov: np.ndarray) -> np.ndarray:
    n = cov.shape[0] // 2
    ev = np.abs(np.linalg.eigvals(1j * symplectic_form(n) @ cov))
    return np.sort(ev)[::2]


def _occupations(cov):
    diag = np.diag(cov)
    return (diag[0::2] + diag[1::2]) / 4.0 - 0.5


def solve_covariance(drift: DriftSystem, check_physical: bool = True) -> SteadyStateResult:
    """Solve M C + C M^T + D = 0 for a stable drift matrix."""
    max_re = np.max(np.linalg.eigvals(drift.M).real)
    if max_re >= 0:
        raise UnstableDriftError(f"drift matrix unstable: max Re(lambda) = {max_re:.3g}")
    cov = solve_continuous_lyapunov(drift.M, -drift.D)
    cov = 0.5 * (cov + cov.T)
    residual = float(np.linalg.norm(drift.M @ cov + cov @ drift.M.T + drift.D) / np.linalg.norm(drift.D))
    if not residual < LYAPUNOV_TOL:
        raise RuntimeError(f"Lyapunov solve inaccurate: residual {residual:.3g}")
    if check_physical:
        nu_min = symplectic_eigenvalues(cov).min()
        if nu_min < 1 - PHYSICALITY_TOL:
            raise UnphysicalCovarianceError(f"smallest symplectic eigenvalue {nu_min:.6g} < 1")
    occ = _occupations(cov)
    return SteadyStateResult(cov, occ[1:], residual, float(occ[0]))


def mode_occupations(result: SteadyStateResult, modes: NormalModeSet, coupling_threshold: float | None = None):
    """Per-mode table: (n, omega_n/2pi, <b^dag b>, Nbar_n, coupled)."""
    c = np.abs(modes.couplings)
    if coupling_threshold is None:
        coupling_threshold = 1e-6 * max(np.max(c), 1e-300)
    return [
        {"mode": n + 1, "frequency_hz": float(modes.frequencies[n] / (2 * np.pi)),
         "occupation": float(result.occupations[n]), "bath_occupation": float(modes.bath_occupations[n]),
         "coupled": bool(c[n] > coupling_threshold)}
        for n in range(modes.n_modes)
    ]


def theta(nu, frequencies, heating_rates, couplings_):
    nu = np.asarray(nu, dtype=float)[:, None]
    w, g, c = (np.asarray(a, dtype=float)[None, :] for a in (frequencies, heating_rates, couplings_))
    return np.sum(c ** 2 * w / (w ** 2 + (g - 1j * nu) ** 2), axis=1)


def spectrum_closed_form(params: SystemParams | float, mean_field: MeanField, modes: NormalModeSet, nu) -> SpectrumSeries:
    """Output spectrum <da^dag(nu) da(nu)> / a^2 with the motion eliminated in Fourier space.

    The Rayleigh peak at nu = 0 is not included. ``params`` may be a
    SystemParams or just kappa.
    """
    kappa = params.kappa if isinstance(params, SystemParams) else float(params)
    nu = np.asarray(nu, dtype=float)
    delta, a2 = mean_field.delta_eff, mean_field.a_bar ** 2
    w, g, c, nb = modes.frequencies, modes.heating_rates, modes.couplings, modes.bath_occupations
    th = theta(nu, w, g, c)
    mix = 1.0 + 4.0 * th * delta * a2 / ((kappa - 1j * nu) ** 2 + delta ** 2)
    s0 = 2.0 / (kappa ** 2 + (nu + delta) ** 2) / np.abs(mix) ** 2
    vacuum = 4 * kappa * np.abs(th) ** 2 * a2 / (kappa ** 2 + (nu - delta) ** 2)
    nuc = nu[:, None]
    thermal = np.sum(c ** 2 * g * (nb / (g ** 2 + (w - nuc) ** 2) + (nb + 1) / (g ** 2 + (w + nuc) ** 2)), axis=1)
    return SpectrumSeries(nu, s0 * (vacuum + thermal))


def ladder_transform(n_modes_total: int) -> np.ndarray:
    """L with (da, da^dag, b_1, b_1^dag, ...) = L (Q_a, P_a, Q_1, P_1, ...)."""
    block = np.array([[1.0, 1.0j], [1.0, -1.0j]]) / np.sqrt(2.0)
    return np.kron(np.eye(n_modes_total), block)


def spectrum_modal(drift: DriftSystem, nu) -> SpectrumSeries:
    """Same spectrum from the eigen-decomposition of M in the ladder-operator basis."""
    nu = np.asarray(nu, dtype=float)
    if drift.a_bar == 0:
        raise ValueError("modal spectrum is normalised by a_bar^2; a_bar = 0 is undefined")
    lam, T = np.linalg.eig(drift.M)
    if np.linalg.cond(T) > DEFECTIVE_COND:
        raise DefectiveMatrixError("drift matrix is close to defective")
    n_total = drift.M.shape[0] // 2
    L = ladder_transform(n_total)
    Tt = L @ T
    Tt_inv = np.linalg.solve(Tt, np.eye(len(lam)))
    weights = Tt[0, :, None] * Tt_inv  # (k, beta)
    row = (1.0 / (lam[None, :] + 1j * nu[:, None])) @ weights  # (nu, beta), element (da, beta)
    g, nb = drift.heating_rates, drift.bath_occupations
    s = 2 * drift.kappa * np.abs(row[:, 1]) ** 2
    s += np.sum(2 * g * (nb + 1) * np.abs(row[:, 3::2]) ** 2, axis=1)
    s += np.sum(2 * g * nb * np.abs(row[:, 2::2]) ** 2, axis=1)
    return SpectrumSeries(nu, s / drift.a_bar ** 2)


def default_nu_grid(modes: NormalModeSet, points: int = 4001) -> np.ndarray:
    wmax = np.max(modes.frequencies)
    return np.linspace(-1.5 * wmax, 1.5 * wmax, points)


def refined_nu_grid(drift: DriftSystem, base: np.ndarray, points_per_pole: int = 401, widths: float = 8.0):
    """Base grid plus dense patches around every pole of the spectrum."""
    lam = np.linalg.eigvals(drift.M)
    patches = [base]
    lo, hi = base.min(), base.max()
    for z in lam:
        centre = -z.imag
        if not lo <= centre <= hi:
            continue
        half = widths * max(abs(z.real), 1e-12 * max(abs(lo), abs(hi)))
        patches.append(np.linspace(centre - half, centre + half, points_per_pole))
    grid = np.unique(np.concatenate(patches))
    return grid[(grid >= lo) & (grid <= hi)]


def find_peaks(nu, S):
    """Indices of strict interior local maxima."""
    S = np.asarray(S)
    inner = (S[1:-1] > S[:-2]) & (S[1:-1] > S[2:])
    return np.flatnonzero(inner) + 1


def assign_peaks(drift: DriftSystem, nu_peaks, widths: float = 3.0) -> np.ndarray:
    """Motional mode (1..2N) behind each spectral peak, 0 for cavity-like poles.

    Each peak is matched to the closest pole of M (frequency -Im(lambda))
    within ``widths`` linewidths |Re(lambda)|; the label is the mode carrying
    most of that pole's eigenvector weight.
    """
    lam, vecs = np.linalg.eig(drift.M)
    weight = (np.abs(vecs) ** 2).reshape(-1, 2, len(lam)).sum(axis=1)
    dominant = np.argmax(weight, axis=0)  # 0 = cavity, n = motional mode n
    labels = []
    for v in np.atleast_1d(nu_peaks):
        dist = np.abs(-lam.imag - v)
        k = int(np.argmin(dist / np.maximum(np.abs(lam.real), 1e-300)))
        labels.append(int(dominant[k]) if dist[k] <= widths * abs(lam[k].real) else 0)
    return np.array(labels, dtype=int)


def _party_indices(modes):
    return [i for m in modes for i in (2 * m, 2 * m + 1)]


def log_negativity(result, party_b, party_a=(0,)) -> float:
    """Logarithmic negativity (base 2) between two groups of modes.

    Modes are numbered with 0 for the cavity and n = 1..2N for the motional
    modes. ``party_b`` may be ``"all"`` (every motional mode) or a sequence of
    mode numbers; modes in neither party are traced out.
    """
    cov = result.covariance if isinstance(result, SteadyStateResult) else np.asarray(result, dtype=float)
    n_total = cov.shape[0] // 2
    party_a = [int(i) for i in np.atleast_1d(party_a)]
    if isinstance(party_b, str):
        if party_b != "all":
            raise ValueError("party_b must be 'all' or a list of mode numbers")
        party_b = [m for m in range(n_total) if m not in party_a]
    party_b = [int(i) for i in np.atleast_1d(party_b)]
    if set(party_a) & set(party_b):
        raise ValueError("parties overlap")
    idx = _party_indices(party_a + party_b)
    sub = cov[np.ix_(idx, idx)]
    if symplectic_eigenvalues(sub).min() < 1 - PHYSICALITY_TOL:
        raise UnphysicalCovarianceError("covariance violates the uncertainty principle")
    flip = np.ones(len(idx))
    flip[2 * len(party_a) + 1::2] = -1.0
    pt = flip[:, None] * sub * flip[None, :]
    nus = symplectic_eigenvalues(pt)
    return float(np.sum(np.maximum(0.0, -np.log2(nus))))
