"""Physical parameters and cavity mean-field quantities.

All frequencies are angular (rad/s), lengths in metres, energies in joules.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.constants import atomic_mass, e, epsilon_0, hbar, k as k_B, pi

TWO_PI = 2.0 * pi
MHZ = TWO_PI * 1e6
CA40_MASS = 39.962590863 * atomic_mass


class ParameterWarning(UserWarning):
    """Parameters outside the regime where the dispersive model holds."""


@dataclass(frozen=True)
class SystemParams:
    """Trap, ion, cavity, pump and bath constants.

    ``heating_rates`` is either a scalar applied to every motional mode or a
    sequence with one entry per mode (2 * n_ions).
    """

    ion_mass: float = CA40_MASS
    ion_charge: float = e
    n_ions: int = 4
    omega_x: float = 2.12 * MHZ
    omega_y: float = 1.0 * MHZ
    g0: float = 9.4 * MHZ
    k: float = TWO_PI / 866e-9
    waist: float = 4.1e-6
    mode_center_y: float = 0.0
    kappa: float = 1.0 * MHZ
    delta_c: float = 0.0
    delta_0: float = 500.0 * MHZ
    gamma: float = 10.0 * MHZ
    eta: float = 0.0
    heating_rates: float | tuple = 100.0
    bath_temperature: float = 1e-3

    def __post_init__(self):
        if not isinstance(self.heating_rates, (int, float)):
            object.__setattr__(self, "heating_rates", tuple(float(g) for g in self.heating_rates))

    def validate(self) -> "SystemParams":
        if self.ion_mass <= 0:
            raise ValueError("ion_mass must be positive")
        if self.n_ions < 1:
            raise ValueError("n_ions must be at least 1")
        for name in ("omega_x", "omega_y", "kappa", "waist", "k"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.k * self.waist < 10:
            warnings.warn(f"k*w = {self.k * self.waist:.3g} < 10; Gaussian mode model is poor",
                          ParameterWarning, stacklevel=2)
        if self.delta_0 == 0 or abs(self.delta_0) <= 10 * max(self.gamma, self.kappa, abs(self.delta_c)):
            warnings.warn("|Delta_0| does not dominate gamma, kappa, |Delta_c|",
                          ParameterWarning, stacklevel=2)
        if not isinstance(self.heating_rates, (int, float)) and len(self.heating_rates) != 2 * self.n_ions:
            raise ValueError("heating_rates needs one entry per motional mode (2 * n_ions)")
        return self

    def with_(self, **changes) -> "SystemParams":
        return replace(self, **changes)

    @property
    def coulomb_constant(self) -> float:
        return self.ion_charge ** 2 / (4.0 * pi * epsilon_0)

    @property
    def length_scale(self) -> float:
        """Natural length (q^2 / (4 pi eps0 m omega_y^2))^(1/3)."""
        return (self.coulomb_constant / (self.ion_mass * self.omega_y ** 2)) ** (1.0 / 3.0)

    @property
    def energy_scale(self) -> float:
        return self.ion_mass * self.omega_y ** 2 * self.length_scale ** 2

    def heating_rate_array(self, n_modes: int | None = None) -> np.ndarray:
        n_modes = 2 * self.n_ions if n_modes is None else n_modes
        if isinstance(self.heating_rates, (int, float)):
            return np.full(n_modes, float(self.heating_rates))
        return np.asarray(self.heating_rates, dtype=float)


@dataclass(frozen=True)
class MeanField:
    a_bar: float
    delta_eff: float
    u0: float
    n_photons: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "n_photons", self.a_bar ** 2)


def _as_positions(positions) -> np.ndarray:
    r = np.asarray(positions, dtype=float)
    return r.reshape(-1, 2)


def mode_amplitude(params: SystemParams, position):
    """Return (g/g0, g) at one or many (x, y) positions."""
    r = np.asarray(position, dtype=float)
    x, y = r[..., 0], r[..., 1]
    factor = np.cos(params.k * x) * np.exp(-(y - params.mode_center_y) ** 2 / (2 * params.waist ** 2))
    return factor, params.g0 * factor


def _coupling_profile(params, r):
    """cos^2(kx) exp(-(y-yc)^2/w^2) per ion."""
    return np.cos(params.k * r[:, 0]) ** 2 * np.exp(-(r[:, 1] - params.mode_center_y) ** 2 / params.waist ** 2)


def u0(params: SystemParams, positions) -> float:
    """Cavity frequency shift sum_j g^2(r_j) / Delta_0."""
    if params.delta_0 == 0:
        raise ZeroDivisionError("Delta_0 = 0: dispersive model invalid")
    r = _as_positions(positions)
    return params.g0 ** 2 * float(np.sum(_coupling_profile(params, r))) / params.delta_0


def grad_u0(params: SystemParams, positions) -> np.ndarray:
    """Gradient of U_0 with respect to every ion coordinate, shape (N, 2)."""
    r = _as_positions(positions)
    kx = params.k * r[:, 0]
    dy = r[:, 1] - params.mode_center_y
    gauss = np.exp(-dy ** 2 / params.waist ** 2)
    pref = params.g0 ** 2 / params.delta_0
    gx = -pref * params.k * np.sin(2 * kx) * gauss
    gy = -pref * 2 * dy / params.waist ** 2 * np.cos(kx) ** 2 * gauss
    return np.column_stack([gx, gy])


def hess_u0(params: SystemParams, positions) -> np.ndarray:
    """Hessian of U_0 in the interleaved (x1, y1, x2, y2, ...) ordering."""
    r = _as_positions(positions)
    n = len(r)
    kx = params.k * r[:, 0]
    dy = r[:, 1] - params.mode_center_y
    w2 = params.waist ** 2
    gauss = np.exp(-dy ** 2 / w2)
    pref = params.g0 ** 2 / params.delta_0
    hxx = -2 * pref * params.k ** 2 * np.cos(2 * kx) * gauss
    hxy = pref * params.k * np.sin(2 * kx) * gauss * 2 * dy / w2
    hyy = pref * np.cos(kx) ** 2 * gauss * (4 * dy ** 2 / w2 ** 2 - 2 / w2)
    h = np.zeros((2 * n, 2 * n))
    idx = np.arange(n)
    h[2 * idx, 2 * idx] = hxx
    h[2 * idx, 2 * idx + 1] = hxy
    h[2 * idx + 1, 2 * idx] = hxy
    h[2 * idx + 1, 2 * idx + 1] = hyy
    return h


def n_eff(params: SystemParams, positions) -> float:
    """Effective number of ions sum_j exp(-(y_j - yc)^2 / w^2)."""
    r = _as_positions(positions)
    return float(np.sum(np.exp(-(r[:, 1] - params.mode_center_y) ** 2 / params.waist ** 2)))


def cooperativity(params: SystemParams, positions) -> float:
    return params.g0 ** 2 * n_eff(params, positions) / (params.kappa * abs(params.delta_0))


def g0_for_cooperativity(params: SystemParams, positions, target: float) -> float:
    """Coupling g0 giving the requested cooperativity at these positions."""
    return float(np.sqrt(target * params.kappa * abs(params.delta_0) / n_eff(params, positions)))


def mean_field_from_u0(params: SystemParams, u0_value: float) -> MeanField:
    delta_eff = params.delta_c - u0_value
    a_bar = abs(params.eta) / np.hypot(params.kappa, delta_eff)
    return MeanField(a_bar=float(a_bar), delta_eff=float(delta_eff), u0=float(u0_value))


def mean_field(params: SystemParams, positions) -> MeanField:
    """Stationary cavity amplitude, phase of eta chosen so that a_bar >= 0."""
    return mean_field_from_u0(params, u0(params, positions))


def output_intensity(mf: MeanField, params: SystemParams) -> float:
    """Mean output photon flux 2 kappa |a_bar|^2 (photons/s)."""
    return 2.0 * params.kappa * mf.a_bar ** 2


def recoil_frequency(params: SystemParams) -> float:
    return hbar * params.k ** 2 / (2.0 * params.ion_mass)


def pump_conversions(params: SystemParams) -> dict:
    """Dimensionless power P = eta^2 omega_R / (kappa omega_x^2) and omega_R."""
    omega_r = recoil_frequency(params)
    return {"P": params.eta ** 2 * omega_r / (params.kappa * params.omega_x ** 2), "omega_R": omega_r}


def power_to_eta(params: SystemParams, power: float) -> float:
    if power < 0:
        raise ValueError("power must be non-negative")
    return float(np.sqrt(power * params.kappa * params.omega_x ** 2 / recoil_frequency(params)))


def with_power(params: SystemParams, power: float) -> SystemParams:
    return params.with_(eta=power_to_eta(params, power))


def effective_decay(params: SystemParams, positions):
    """Cavity decay including spontaneous emission, and a dispersive-validity flag."""
    kappa_eff = params.kappa + u0(params, positions) * params.gamma / (2.0 * params.delta_0)
    return kappa_eff, bool(abs(kappa_eff - params.kappa) / params.kappa < 0.1)


def bose_occupation(omega, temperature: float):
    """Thermal occupation 1 / (exp(hbar omega / k_B T) - 1); zero at T = 0."""
    omega = np.asarray(omega, dtype=float)
    if temperature <= 0:
        return np.zeros_like(omega)
    return 1.0 / np.expm1(hbar * omega / (k_B * temperature))
