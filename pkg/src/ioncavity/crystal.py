"""Equilibrium structures of the ion chain in trap + Coulomb + cavity potential.

Internally positions are measured in units of the natural length
``l = (q^2 / (4 pi eps0 m omega_y^2))^(1/3)`` and energies in ``m omega_y^2 l^2``;
the public functions take and return SI quantities.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import hbar
from scipy.optimize import bisect, minimize

from .params import MeanField, SystemParams, _as_positions, grad_u0, hess_u0, mean_field, u0

log = logging.getLogger(__name__)

COINCIDENCE_DISTANCE = 1e-12  # m
GRADIENT_TOL = 1e-12  # max-norm, units of m omega_y^2 l
SADDLE_TOL = 1e-6  # Hessian eigenvalue, units of m omega_y^2
LINEAR_THRESHOLD = 1e-3  # max |x| in units of 1/k


class CoincidentIonsError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, message, best_positions=None, gradient_norm=None):
        super().__init__(message)
        self.best_positions = best_positions
        self.gradient_norm = gradient_norm


@dataclass
class CrystalConfiguration:
    positions: np.ndarray
    potential_energy: float
    gradient_norm: float
    classification: str
    mean_field: MeanField
    is_minimum: bool = True
    min_hessian_eigenvalue: float = np.nan
    iterations: int = 0
    converged: bool = True
    saddle_escapes: int = field(default=0, repr=False)

    @property
    def n_ions(self) -> int:
        return len(self.positions)

    @property
    def max_abs_x(self) -> float:
        return float(np.max(np.abs(self.positions[:, 0])))

    def mirrored(self) -> "CrystalConfiguration":
        r = self.positions.copy()
        r[:, 0] *= -1
        return CrystalConfiguration(r, self.potential_energy, self.gradient_norm, self.classification,
                                    self.mean_field, self.is_minimum, self.min_hessian_eigenvalue,
                                    self.iterations, self.converged)

    def to_dict(self) -> dict:
        return {
            "positions_m": self.positions.tolist(),
            "potential_energy_J": self.potential_energy,
            "gradient_norm_N": self.gradient_norm,
            "classification": self.classification,
            "is_minimum": self.is_minimum,
            "min_hessian_eigenvalue_J_per_m2": self.min_hessian_eigenvalue,
            "converged": self.converged,
            "iterations": self.iterations,
            "mean_field": {
                "a_bar": self.mean_field.a_bar,
                "delta_eff_rad_per_s": self.mean_field.delta_eff,
                "u0_rad_per_s": self.mean_field.u0,
                "n_photons": self.mean_field.n_photons,
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


# --- scaled potential ------------------------------------------------------

class _ScaledPotential:
    """V_tot and derivatives on a flat interleaved vector u = r / l."""

    def __init__(self, params: SystemParams):
        self.p = params
        self.l = params.length_scale
        self.e0 = params.energy_scale
        self.trap = np.tile([(params.omega_x / params.omega_y) ** 2, 1.0], params.n_ions)
        self.has_field = params.eta != 0.0
        self.min_dist = COINCIDENCE_DISTANCE / self.l

    def _pairs(self, u):
        r = u.reshape(-1, 2)
        d = r[:, None, :] - r[None, :, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", d, d))
        np.fill_diagonal(dist, np.inf)
        if np.min(dist) < self.min_dist:
            raise CoincidentIonsError("two ions closer than 1e-12 m")
        return d, dist

    def energy(self, u):
        _, dist = self._pairs(u)
        v = 0.5 * np.dot(self.trap, u * u) + 0.5 * np.sum(1.0 / dist)
        if self.has_field:
            p = self.p
            delta_eff = p.delta_c - u0(p, u * self.l)
            v += hbar * p.eta ** 2 / p.kappa * np.arctan(-delta_eff / p.kappa) / self.e0
        return v

    def gradient(self, u):
        d, dist = self._pairs(u)
        g = self.trap * u - np.einsum("ijk,ij->ik", d, dist ** -3).ravel()
        if self.has_field:
            mf = mean_field(self.p, u * self.l)
            g += hbar * mf.a_bar ** 2 * grad_u0(self.p, u * self.l).ravel() * self.l / self.e0
        return g

    def hessian(self, u, fixed_field=False):
        d, dist = self._pairs(u)
        n = self.p.n_ions
        inv3 = dist ** -3
        inv5 = dist ** -5
        blocks = 3 * d[:, :, :, None] * d[:, :, None, :] * inv5[:, :, None, None] \
            - np.eye(2)[None, None] * inv3[:, :, None, None]
        h = -blocks.transpose(0, 2, 1, 3).reshape(2 * n, 2 * n)
        diag = blocks.sum(axis=1)
        for i in range(n):
            h[2 * i:2 * i + 2, 2 * i:2 * i + 2] = diag[i]
        h += np.diag(self.trap)
        if self.has_field:
            r = u * self.l
            mf = mean_field(self.p, r)
            scale = hbar * self.l ** 2 / self.e0
            h += scale * mf.a_bar ** 2 * hess_u0(self.p, r)
            if not fixed_field:
                gu = grad_u0(self.p, r).ravel()
                kap2 = self.p.kappa ** 2 + mf.delta_eff ** 2
                h += scale * 2 * mf.delta_eff * mf.a_bar ** 2 / kap2 * np.outer(gu, gu)
        return h


def _check_positions(params, positions):
    r = _as_positions(positions)
    if len(r) != params.n_ions:
        raise ValueError(f"expected {params.n_ions} ions, got {len(r)}")
    return r


def v_total(params: SystemParams, positions) -> float:
    """Trap + Coulomb + cavity-induced potential energy in joules."""
    r = _check_positions(params, positions)
    pot = _ScaledPotential(params)
    return float(pot.energy(r.ravel() / pot.l) * pot.e0)


def grad_v_total(params: SystemParams, positions) -> np.ndarray:
    """Analytic gradient of :func:`v_total`, shape (N, 2), in newtons."""
    r = _check_positions(params, positions)
    pot = _ScaledPotential(params)
    return (pot.gradient(r.ravel() / pot.l) * pot.e0 / pot.l).reshape(-1, 2)


def hessian_v_total(params: SystemParams, positions, fixed_field: bool = False) -> np.ndarray:
    """Hessian in J/m^2, interleaved (x1, y1, x2, ...) ordering.

    With ``fixed_field`` the cavity amplitude is frozen at its value at
    ``positions`` (Hessian of V_trap + V_Coul + hbar |a|^2 U_0); otherwise it is
    the Hessian of V_tot, which adds the cavity-mediated rank-one term.
    """
    r = _check_positions(params, positions)
    pot = _ScaledPotential(params)
    return pot.hessian(r.ravel() / pot.l, fixed_field) * pot.e0 / pot.l ** 2


# --- minimisation ----------------------------------------------------------

def _safe_energy(pot, u):
    try:
        return pot.energy(u)
    except CoincidentIonsError:
        return np.inf


def _safe_gradient(pot, u):
    try:
        return pot.gradient(u)
    except CoincidentIonsError:
        return np.full_like(u, np.nan)


def _newton_polish(pot, u, g, gtol, maxiter):
    """|eigenvalue| Newton steps, accepted when the gradient shrinks and the energy does not rise.

    Converges to the nearby stationary point even when it is a saddle on a
    symmetry manifold (the caller flags those).
    """
    f = _safe_energy(pot, u)
    for it in range(maxiter):
        gmax = np.max(np.abs(g))
        if gmax < gtol:
            return u, g, it, True
        evals, evecs = np.linalg.eigh(pot.hessian(u))
        step = -evecs @ ((evecs.T @ g) / np.maximum(np.abs(evals), 1e-12))
        t = 1.0
        while t > 1e-8:
            g_new = _safe_gradient(pot, u + t * step)
            f_new = _safe_energy(pot, u + t * step)
            if np.max(np.abs(g_new)) < gmax and f_new <= f + 1e-13 * abs(f):
                break
            t *= 0.5
        else:
            return u, g, it, False
        u, g, f = u + t * step, g_new, f_new
    return u, g, maxiter, np.max(np.abs(g)) < gtol


def _minimize(pot, u0_vec, gtol, maxiter, newton_switch=1e-4):
    """scipy BFGS until the gradient is small, then Newton polishing to ``gtol``."""
    u, g = u0_vec.copy(), pot.gradient(u0_vec)
    used = 0
    g0 = np.max(np.abs(g))
    if g0 >= gtol:
        # at least two decades of descent, so a kicked saddle is left behind
        target = min(newton_switch, 1e-2 * g0)
        f = _safe_energy(pot, u)
        for _ in range(20):
            res = minimize(lambda v: _safe_energy(pot, v), u, jac=lambda v: _safe_gradient(pot, v),
                           method="BFGS", options={"gtol": target, "maxiter": maxiter - used, "norm": np.inf})
            used += res.nit
            progressed = res.fun < f
            u, f, g = res.x, res.fun, pot.gradient(res.x)
            # line searches lose precision on flat landscapes; restart while the energy still drops
            if res.success or np.max(np.abs(g)) < target or not progressed or used >= maxiter:
                break
        if np.max(np.abs(g)) >= newton_switch:
            return u, g, used, False
    u, g, it, ok = _newton_polish(pot, u, g, gtol, max(maxiter - used, 0))
    return u, g, used + it, ok


def classify(params: SystemParams, positions) -> str:
    """linear / zigzag / other from transverse displacements along the y-sorted chain.

    Ions closer to the axis than the linear threshold count as undisplaced, so
    a zigzag confined to the centre of a long chain is still a zigzag as long
    as the displaced ions form one contiguous block with alternating signs.
    """
    r = _as_positions(positions)
    r = r[np.argsort(r[:, 1])]
    x = r[:, 0]
    big = np.abs(x) >= LINEAR_THRESHOLD / params.k
    if not big.any():
        return "linear"
    idx = np.flatnonzero(big)
    signs = np.sign(x[idx])
    contiguous = np.all(np.diff(idx) == 1)
    if len(idx) > 1 and contiguous and np.all(signs[1:] == -signs[:-1]):
        return "zigzag"
    return "other"


def _canonical(r):
    r = r[np.argsort(r[:, 1], kind="stable")]
    if r[0, 0] < 0:
        r[:, 0] *= -1
    return r


def find_equilibrium(params: SystemParams, seed_positions, gtol: float = GRADIENT_TOL,
                     maxiter: int = 20000, escape_saddle: bool = False,
                     kick: float | None = None) -> CrystalConfiguration:
    """Local minimum of V_tot starting from ``seed_positions``.

    The returned configuration is sorted along y and mirrored so that x_1 >= 0.
    ``is_minimum`` is False when the converged point is a saddle of V_tot; with
    ``escape_saddle`` the solver instead kicks along the unstable direction by
    ``kick`` (default 1e-3/k) and keeps descending.
    """
    seed = _check_positions(params, seed_positions)
    pot = _ScaledPotential(params)
    u = seed.ravel() / pot.l
    kick = LINEAR_THRESHOLD / params.k if kick is None else kick
    total_it = 0
    escapes = 0
    while True:
        u, g, it, ok = _minimize(pot, u, gtol, maxiter - total_it)
        total_it += it
        if not ok:
            gnorm = float(np.max(np.abs(g)) * pot.e0 / pot.l)
            raise ConvergenceError(f"no convergence after {total_it} iterations (|grad| = {gnorm:.3g} N)",
                                   best_positions=_canonical(u.reshape(-1, 2) * pot.l), gradient_norm=gnorm)
        evals, evecs = np.linalg.eigh(pot.hessian(u))
        is_min = evals[0] > -SADDLE_TOL
        if is_min or not escape_saddle or escapes >= 10:
            break
        direction = evecs[:, 0]
        if direction[np.argmax(np.abs(direction))] < 0:
            direction = -direction
        u = u + direction / np.max(np.abs(direction)) * kick / pot.l
        escapes += 1
    r = _canonical(u.reshape(-1, 2) * pot.l)
    cfg = CrystalConfiguration(
        positions=r,
        potential_energy=float(pot.energy(r.ravel() / pot.l) * pot.e0),
        gradient_norm=float(np.max(np.abs(g)) * pot.e0 / pot.l),
        classification=classify(params, r),
        mean_field=mean_field(params, r),
        is_minimum=bool(is_min),
        min_hessian_eigenvalue=float(evals[0] * params.ion_mass * params.omega_y ** 2),
        iterations=total_it,
        converged=True,
        saddle_escapes=escapes,
    )
    if not is_min:
        log.info("equilibrium is a saddle (lowest Hessian eigenvalue %.3g m omega_y^2)", evals[0])
    return cfg


# --- seeds and free-space structure ---------------------------------------

def _axial_chain(n: int) -> np.ndarray:
    """Scaled axial equilibrium positions of n ions in a harmonic trap."""
    if n == 1:
        return np.zeros(1)
    spacing = 2.018 * n ** -0.559
    y = (np.arange(n) - (n - 1) / 2) * spacing
    for _ in range(200):
        d = y[:, None] - y[None, :]
        np.fill_diagonal(d, np.inf)
        grad = y - np.sum(np.sign(d) / d ** 2, axis=1)
        if np.max(np.abs(grad)) < 1e-14:
            break
        a = 2.0 / np.abs(d) ** 3
        hess = -a
        np.fill_diagonal(hess, 1.0 + np.sum(a, axis=1))
        step = np.linalg.solve(hess, grad)
        t = 1.0
        while np.any(np.diff(y - t * step) <= 0):
            t *= 0.5
        y = y - t * step
    return y


def linear_chain_seed(params: SystemParams) -> np.ndarray:
    """Free-space linear chain along y (x_j = 0), shape (N, 2) in metres."""
    y = _axial_chain(params.n_ions) * params.length_scale
    return np.column_stack([np.zeros_like(y), y])


def zigzag_seed(params: SystemParams, amplitude: float) -> np.ndarray:
    """Linear chain with alternating x = +amplitude/2, -amplitude/2, ..."""
    r = linear_chain_seed(params)
    r[:, 0] = amplitude / 2 * (-1.0) ** np.arange(params.n_ions)
    return r


def central_spacing(params: SystemParams) -> float:
    y = linear_chain_seed(params)[:, 1]
    if len(y) < 2:
        return 0.0
    return float(np.min(np.diff(y)))


def _transverse_coulomb_matrix(y_scaled):
    d = np.abs(y_scaled[:, None] - y_scaled[None, :])
    np.fill_diagonal(d, np.inf)
    a = -d ** -3
    np.fill_diagonal(a, -np.sum(a, axis=1))
    return a


def critical_frequency(params: SystemParams, rtol: float = 1e-6) -> float:
    """Free-space omega_crit: omega_x where the linear chain loses transverse stability.

    Found by bisection on the sign of the lowest transverse Hessian eigenvalue
    (pump switched off). Raises ValueError when no sign change can be bracketed.
    """
    a = _transverse_coulomb_matrix(_axial_chain(params.n_ions))

    def lowest(alpha):
        return np.linalg.eigvalsh(alpha ** 2 * np.eye(len(a)) - a)[0]

    lo, hi = 0.0, 1.0
    if lowest(lo) >= 0:
        raise ValueError("linear chain is transversally stable for every omega_x; no critical frequency")
    while lowest(hi) < 0:
        hi *= 2.0
        if hi > 1e6:
            raise ValueError("could not bracket the critical frequency")
    alpha = bisect(lowest, lo, hi, xtol=1e-15, rtol=rtol * 1e-3)
    return float(alpha * params.omega_y)


def soft_mode_vector(params: SystemParams) -> np.ndarray:
    """Normalised free-space zigzag (lowest transverse) mode of the linear chain, x-components only."""
    a = _transverse_coulomb_matrix(_axial_chain(params.n_ions))
    alpha2 = (params.omega_x / params.omega_y) ** 2
    _, vecs = np.linalg.eigh(alpha2 * np.eye(len(a)) - a)
    v = vecs[:, 0]
    return v if v[0] >= 0 else -v


def positions_to_csv_rows(positions):
    return [(j, float(x), float(y)) for j, (x, y) in enumerate(_as_positions(positions))]
