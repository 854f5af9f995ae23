"""Config files (TOML or JSON) to SystemParams plus per-command run settings.

Frequencies are given in ordinary MHz and multiplied by 2 pi on load. The
``[system]`` table takes these keys (defaults from SystemParams):

=========================  ==========================================
ion_mass_amu               39.962590863 (40Ca+)
ion_charge_e               1
n_ions                     4
omega_x_mhz, omega_y_mhz   2.12, 1.0
g0_mhz                     9.4, or ``cooperativity`` instead
wavelength_nm              866, or ``wavenumber_per_m``
waist_um                   4.1, or "central_spacing"
mode_center_y_um           0, or ``mode_center_y_spacings``
kappa_mhz                  1.0
delta_c_mhz, delta_0_mhz   0, 500
gamma_mhz                  10
eta_mhz                    0, or ``power`` (dimensionless P)
heating_rate_per_s         100 (scalar or one value per mode)
bath_temperature_k         1e-3
=========================  ==========================================

``cooperativity`` fixes g0 from N_eff of the free-space linear chain with the
mode centred on the chain, so an offset mode keeps the same g0 as the
centred one. Other tables (``[sweep]``, ``[landau]``, ``[state]``, ...) hold
settings for single commands. ``[panels.<name>]`` tables override any of the
above for one panel of a multi-panel figure.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from scipy.constants import atomic_mass, e, pi

from .crystal import central_spacing, linear_chain_seed
from .params import MHZ, SystemParams, g0_for_cooperativity, with_power

_MHZ_KEYS = {
    "omega_x_mhz": "omega_x", "omega_y_mhz": "omega_y", "g0_mhz": "g0", "kappa_mhz": "kappa",
    "delta_c_mhz": "delta_c", "delta_0_mhz": "delta_0", "gamma_mhz": "gamma", "eta_mhz": "eta",
}
_DERIVED = {"cooperativity", "power", "mode_center_y_spacings"}
SYSTEM_KEYS = set(_MHZ_KEYS) | _DERIVED | {
    "ion_mass_amu", "ion_charge_e", "n_ions", "wavelength_nm", "wavenumber_per_m", "waist_um",
    "mode_center_y_um", "heating_rate_per_s", "bath_temperature_k",
}
FIGURES = ("fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    system: dict
    sections: dict = field(default_factory=dict)
    panels: dict = field(default_factory=dict)  # name -> RunConfig without panels
    source: str = "<defaults>"

    def section(self, name: str) -> dict:
        return dict(self.sections.get(name, {}))

    def params(self) -> SystemParams:
        return resolve_system(self.system)

    def panel_items(self):
        """(name, config) pairs; a config without panels is its own single panel."""
        if not self.panels:
            return [("", self)]
        return list(self.panels.items())

    def as_dict(self) -> dict:
        return {"system": self.system, **self.sections,
                **({"panels": {k: v.as_dict() for k, v in self.panels.items()}} if self.panels else {})}


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def from_dict(data: dict, source: str = "<dict>") -> RunConfig:
    data = dict(data)
    system = data.pop("system", {})
    unknown = set(system) - SYSTEM_KEYS
    if unknown:
        raise ConfigError(f"unknown [system] keys: {sorted(unknown)}")
    panels_raw = data.pop("panels", {})
    cfg = RunConfig(system=system, sections=data, source=source)
    for name, override in panels_raw.items():
        merged = _merge({"system": system, **data}, override)
        cfg.panels[name] = from_dict(merged, f"{source}#{name}")
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    raw = path.read_bytes()
    if path.suffix.lower() == ".json":
        data = json.loads(raw)
    else:
        data = tomllib.loads(raw.decode())
    return from_dict(data, str(path))


def bundled_config(figure: str) -> RunConfig:
    if figure not in FIGURES:
        raise ConfigError(f"no bundled config for {figure!r}; choose from {', '.join(FIGURES)}")
    text = resources.files("ioncavity").joinpath("configs", f"{figure}.toml").read_text()
    return from_dict(tomllib.loads(text), f"bundled:{figure}")


def resolve_system(system: dict) -> SystemParams:
    """Turn a [system] table into SystemParams, evaluating derived keys."""
    s = dict(system)
    kw = {}
    if "ion_mass_amu" in s:
        kw["ion_mass"] = float(s["ion_mass_amu"]) * atomic_mass
    if "ion_charge_e" in s:
        kw["ion_charge"] = float(s["ion_charge_e"]) * e
    if "n_ions" in s:
        kw["n_ions"] = int(s["n_ions"])
    for key, name in _MHZ_KEYS.items():
        if key in s:
            kw[name] = float(s[key]) * MHZ
    if "wavelength_nm" in s and "wavenumber_per_m" in s:
        raise ConfigError("give either wavelength_nm or wavenumber_per_m")
    if "wavelength_nm" in s:
        kw["k"] = 2 * pi / (float(s["wavelength_nm"]) * 1e-9)
    if "wavenumber_per_m" in s:
        kw["k"] = float(s["wavenumber_per_m"])
    if "heating_rate_per_s" in s:
        h = s["heating_rate_per_s"]
        kw["heating_rates"] = tuple(float(x) for x in h) if isinstance(h, (list, tuple)) else float(h)
    if "bath_temperature_k" in s:
        kw["bath_temperature"] = float(s["bath_temperature_k"])
    params = SystemParams(**kw)

    waist = s.get("waist_um")
    if waist == "central_spacing":
        params = params.with_(waist=central_spacing(params))
    elif waist is not None:
        params = params.with_(waist=float(waist) * 1e-6)

    if "mode_center_y_um" in s and "mode_center_y_spacings" in s:
        raise ConfigError("give either mode_center_y_um or mode_center_y_spacings")
    if "mode_center_y_um" in s:
        params = params.with_(mode_center_y=float(s["mode_center_y_um"]) * 1e-6)
    if "mode_center_y_spacings" in s:
        params = params.with_(mode_center_y=float(s["mode_center_y_spacings"]) * central_spacing(params))

    if "cooperativity" in s:
        if "g0_mhz" in s:
            raise ConfigError("give either g0_mhz or cooperativity")
        centred = params.with_(mode_center_y=0.0)
        params = params.with_(g0=g0_for_cooperativity(centred, linear_chain_seed(centred), float(s["cooperativity"])))
    if "power" in s:
        if "eta_mhz" in s:
            raise ConfigError("give either eta_mhz or power")
        params = with_power(params, float(s["power"]))
    return params.validate()
