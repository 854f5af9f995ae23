"""Landau-type potential of the zigzag (soft) mode and minima counting."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .crystal import critical_frequency, linear_chain_seed, soft_mode_vector, v_total
from .params import SystemParams


@dataclass
class SoftModePotential:
    b: np.ndarray  # zigzag amplitude, m
    values: np.ndarray  # J
    minima: np.ndarray  # b at the minima, m
    minima_values: np.ndarray  # J
    stability_class: str  # linear-only | bistable | zigzag-only | other


def theta_parameter(params: SystemParams, omega_crit: float | None = None) -> float:
    """N omega_s^2 / omega_x^2 with omega_s^2 = omega_x^2 - omega_crit^2."""
    wc = critical_frequency(params) if omega_crit is None else omega_crit
    return params.n_ions * (params.omega_x ** 2 - wc ** 2) / params.omega_x ** 2


def v_s_uniform(b, theta: float, P: float, C: float, params: SystemParams):
    """Soft-mode potential of a uniformly illuminated, equidistant chain (J)."""
    if C < 0:
        raise ValueError("cooperativity must be non-negative")
    kb2 = params.k * np.asarray(b, dtype=float) / 2
    scale = params.ion_mass * params.omega_x ** 2 / params.k ** 2
    return scale * (theta / 2 * kb2 ** 2 + 2 * P * np.arctan(C * np.cos(kb2) ** 2))


def threshold_power(theta: float, C: float) -> float:
    """Power above which b = 0 stops being a minimum; inf for C = 0."""
    if C <= 0:
        return np.inf
    return theta * (1 + C ** 2) / (4 * C)


def curvature_at_origin(theta: float, P: float, C: float, params: SystemParams, h: float | None = None) -> float:
    """Five-point finite-difference d^2 V_s / db^2 at b = 0."""
    h = 1e-3 / params.k if h is None else h
    f = lambda b: v_s_uniform(b, theta, P, C, params)
    return float((-f(2 * h) + 16 * f(h) - 30 * f(0.0) + 16 * f(-h) - f(-2 * h)) / (12 * h * h))


def numeric_threshold_power(theta: float, C: float, params: SystemParams) -> float:
    """Power where the finite-difference curvature at b = 0 changes sign."""
    g = lambda P: curvature_at_origin(theta, P, C, params)
    hi = 1.0
    while g(hi) > 0:
        hi *= 2
        if hi > 1e12:
            return np.inf
    return brentq(g, 0.0, hi, xtol=1e-300, rtol=1e-14)


def count_minima(b, values):
    """Interior local minima on a monotone grid, refined by parabolic interpolation.

    A point counts when it is strictly below its left neighbour and not above
    its right neighbour, so a flat two-point bottom (symmetric even grids)
    counts once.
    """
    b = np.asarray(b, dtype=float)
    v = np.asarray(values, dtype=float)
    if len(b) < 5 or len(b) != len(v):
        raise ValueError("need at least 5 grid points matching the values")
    db = np.diff(b)
    if not (np.all(db > 0) or np.all(db < 0)):
        raise ValueError("grid must be strictly monotone")
    idx = np.flatnonzero((v[1:-1] < v[:-2]) & (v[1:-1] <= v[2:])) + 1
    locs, vals = [], []
    for i in idx:
        x0, x1, x2 = b[i - 1:i + 2]
        y0, y1, y2 = v[i - 1:i + 2]
        denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
        a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
        bb = (x2 ** 2 * (y0 - y1) + x1 ** 2 * (y2 - y0) + x0 ** 2 * (y1 - y2)) / denom
        if a > 0:
            xv = -bb / (2 * a)
            cc = y1 - a * x1 ** 2 - bb * x1
            locs.append(xv)
            vals.append(a * xv ** 2 + bb * xv + cc)
        else:
            locs.append(x1)
            vals.append(y1)
    return len(locs), np.array(locs), np.array(vals)


def classify_minima(locations, spacing: float) -> str:
    locations = np.asarray(locations)
    at_zero = np.abs(locations) <= spacing
    n_zero = int(np.sum(at_zero))
    side = locations[~at_zero]
    pair = len(side) == 2 and np.isclose(side[0], -side[1], atol=spacing)
    if n_zero == 1 and len(side) == 0:
        return "linear-only"
    if n_zero == 1 and pair:
        return "bistable"
    if n_zero == 0 and pair:
        return "zigzag-only"
    return "other"


def default_b_grid(params: SystemParams, points: int = 400) -> np.ndarray:
    return np.linspace(-1.5 * np.pi, 1.5 * np.pi, points) / params.k


def _potential(b, values):
    n, locs, vals = count_minima(b, values)
    spacing = float(np.max(np.abs(np.diff(b))))
    return SoftModePotential(np.asarray(b), np.asarray(values), locs, vals, classify_minima(locs, spacing))


def uniform_potential(theta: float, P: float, C: float, params: SystemParams, b_grid=None) -> SoftModePotential:
    b = default_b_grid(params) if b_grid is None else np.asarray(b_grid, dtype=float)
    return _potential(b, v_s_uniform(b, theta, P, C, params))


def v_s_projected(params: SystemParams, b_grid=None) -> SoftModePotential:
    """V_tot along the free-space soft-mode direction of the linear chain.

    b is twice the transverse displacement of the most displaced ion. Other
    coordinates are not relaxed. Values are relative to the trap + Coulomb
    energy of the linear chain, so the cavity term is kept at b = 0.
    """
    b = default_b_grid(params) if b_grid is None else np.asarray(b_grid, dtype=float)
    lin = linear_chain_seed(params)
    v = soft_mode_vector(params)
    v = v / np.max(np.abs(v))
    ref = v_total(params.with_(eta=0.0), lin)
    values = np.empty_like(b)
    for i, bi in enumerate(b):
        r = lin.copy()
        r[:, 0] = bi / 2 * v
        values[i] = v_total(params, r) - ref
    return _potential(b, values)
