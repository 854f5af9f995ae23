"""Pump-power sweeps: linear and zigzag branches, hysteresis and bistability."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .crystal import ConvergenceError, CrystalConfiguration, find_equilibrium, linear_chain_seed, zigzag_seed
from .linearized import drift_matrix, normal_modes, zigzag_mode_index
from .params import SystemParams, mean_field_from_u0, output_intensity, u0, with_power
from .steadystate import log_negativity, solve_covariance

log = logging.getLogger(__name__)

BISTABILITY_RTOL = 1e-4
ZIGZAG_SEED_AMPLITUDE = 2.0  # units of 1/k


@dataclass
class BranchPoint:
    power: float
    branch: str
    configuration: CrystalConfiguration | None
    classification: str
    intensity: float  # I_out / I_0
    delta_eff: float  # rad/s
    stable: bool
    log_negativity: float = np.nan  # cavity vs all motional modes
    log_negativity_zigzag: float = np.nan  # cavity vs the zigzag mode alone
    error: str = ""


@dataclass
class BranchTable:
    params: SystemParams
    powers: np.ndarray
    branches: dict = field(default_factory=dict)  # name -> list[BranchPoint], one per power
    reference_intensity: float = np.nan  # I_0, photons/s

    def rows(self):
        for name, points in self.branches.items():
            for p in points:
                yield (p.power, name, p.classification, p.intensity, p.delta_eff, int(p.stable), p.log_negativity)


@dataclass
class HysteresisResult:
    powers: np.ndarray
    up: list  # BranchPoint, ascending power
    down: list  # BranchPoint, same power order as ``up``
    loop_area: float  # integral of (I_down - I_up) dP, units of I_0

    def rows(self):
        for trace, pts in (("up", self.up), ("down", self.down)):
            for p in pts:
                yield (p.power, trace, p.classification, p.intensity, p.delta_eff, int(p.stable))


def reference_intensity(params: SystemParams) -> float:
    """I_0: output flux at P = 1 with the free-space linear chain in the cavity."""
    p1 = with_power(params, 1.0)
    return output_intensity(mean_field_from_u0(p1, u0(p1, linear_chain_seed(p1))), p1)


def default_power_grid(p_min: float = 1e-3, p_max: float = 1.0, points: int = 200) -> np.ndarray:
    return np.geomspace(p_min, p_max, points)


def entanglement(params: SystemParams, configuration: CrystalConfiguration) -> dict:
    """Cavity-motion log-negativity, to all modes and to the zigzag mode alone."""
    modes = normal_modes(params, configuration)
    drift = drift_matrix(params, configuration, modes)
    result = solve_covariance(drift)
    iz = zigzag_mode_index(modes, configuration)
    return {"all": log_negativity(result, "all"), "zigzag": log_negativity(result, [iz + 1]),
            "zigzag_mode": iz + 1}


def _point(params, power, branch, cfg, i0, with_entanglement, error=""):
    if cfg is None:
        return BranchPoint(power, branch, None, "failed", np.nan, np.nan, False, error=error)
    en = {"all": np.nan, "zigzag": np.nan}
    if with_entanglement and cfg.is_minimum:
        try:
            en = entanglement(params, cfg)
        except (ValueError, RuntimeError) as exc:
            log.info("no entanglement at P=%.4g (%s): %s", power, branch, exc)
    return BranchPoint(power, branch, cfg, cfg.classification, output_intensity(cfg.mean_field, params) / i0,
                       cfg.mean_field.delta_eff, cfg.is_minimum, en["all"], en["zigzag"], error)


def _trace(params, powers, seed, escape, kick_from_linear, i0, with_entanglement, name, pin_axis=False):
    """Warm-started continuation along ``powers`` in the given order.

    With ``pin_axis`` every seed is put back on the trap axis (x = 0), which is
    invariant under the dynamics, so the linear state is followed past the
    point where it turns into a saddle.
    """
    out = []
    prev = seed
    for P in powers:
        q = with_power(params, P)
        try:
            cfg = find_equilibrium(q, prev, escape_saddle=escape)
        except (ConvergenceError, ValueError) as exc:
            log.warning("sweep point P=%.4g on %s failed: %s", P, name, exc)
            out.append(_point(q, P, name, None, i0, False, str(exc)))
            continue
        out.append(_point(q, P, name, cfg, i0, with_entanglement))
        prev = cfg.positions
        if pin_axis:
            prev = prev.copy()
            prev[:, 0] = 0.0
        if kick_from_linear and cfg.classification == "linear":
            prev = prev.copy()
            prev[:, 0] = 1e-3 / params.k * (-1.0) ** np.arange(len(prev))
    return out


def sweep_power(params: SystemParams, powers, seeds=("linear", "zigzag"), with_entanglement: bool = False,
                threads: int = 1, zigzag_amplitude: float | None = None) -> BranchTable:
    """Follow the linear and zigzag branches over a monotone grid of dimensionless powers.

    The linear branch is continued towards increasing power starting from the
    free-space chain, and is reported as unstable once it becomes a saddle.
    The zigzag branch is continued towards decreasing power starting from a
    zigzag seed at the largest power; when it collapses to the linear chain the
    next seed gets a 1e-3/k zigzag kick. Failed points are recorded, not fatal.
    """
    powers = np.asarray(powers, dtype=float)
    d = np.diff(powers)
    if len(powers) == 0 or not (np.all(d > 0) or np.all(d < 0)):
        raise ValueError("power grid must be strictly monotone")
    if np.any(powers < 0):
        raise ValueError("powers must be non-negative")
    i0 = reference_intensity(params)
    amp = (ZIGZAG_SEED_AMPLITUDE if zigzag_amplitude is None else zigzag_amplitude) / params.k
    asc = np.argsort(powers)
    jobs = {}
    for name in seeds:
        if name == "linear":
            jobs[name] = (powers[asc], linear_chain_seed(params), False, False, asc, True)
        elif name == "zigzag":
            desc = asc[::-1]
            jobs[name] = (powers[desc], zigzag_seed(params, amp), True, True, desc, False)
        else:
            raise ValueError(f"unknown seed {name!r}")

    def run(name):
        grid, seed, escape, kick, order, pin = jobs[name]
        pts = _trace(params, grid, seed, escape, kick, i0, with_entanglement, name, pin)
        ordered = [None] * len(powers)
        for k, idx in enumerate(order):
            ordered[idx] = pts[k]
        return name, ordered

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = dict(pool.map(run, list(jobs)))
    return BranchTable(params, powers, {name: results[name] for name in seeds}, i0)


def hysteresis(params: SystemParams, powers, with_entanglement: bool = False) -> HysteresisResult:
    """Adiabatic up-sweep from the linear chain, then down-sweep from the final state."""
    powers = np.sort(np.asarray(powers, dtype=float))
    i0 = reference_intensity(params)
    up = _trace(params, powers, linear_chain_seed(params), True, False, i0, with_entanglement, "up")
    last = next((p.configuration for p in reversed(up) if p.configuration is not None), None)
    start = last.positions if last is not None else linear_chain_seed(params)
    down = _trace(params, powers[::-1], start, True, False, i0, with_entanglement, "down")[::-1]
    iu = np.array([p.intensity for p in up])
    idn = np.array([p.intensity for p in down])
    ok = np.isfinite(iu) & np.isfinite(idn)
    if len(powers) < 2:
        area = 0.0
    else:
        area = float(trapezoid((idn - iu)[ok], powers[ok])) if ok.sum() > 1 else np.nan
    return HysteresisResult(powers, up, down, area)


def equilibrium_on_branch(params: SystemParams, power: float, branch: str = "zigzag",
                          start_power: float | None = None, steps: int = 40,
                          zigzag_amplitude: float | None = None) -> CrystalConfiguration:
    """Equilibrium at ``power`` reached by continuation along one branch.

    The zigzag branch is followed down from ``start_power`` (default 4 * power),
    which reaches zigzag states inside the bistable window that a direct solve
    from a small zigzag seed would miss. The linear branch is solved directly.
    """
    if branch == "linear":
        q = with_power(params, power)
        return find_equilibrium(q, linear_chain_seed(q))
    if branch != "zigzag":
        raise ValueError(f"unknown branch {branch!r}")
    start = 4.0 * power if start_power is None else start_power
    amp = (ZIGZAG_SEED_AMPLITUDE if zigzag_amplitude is None else zigzag_amplitude) / params.k
    prev = zigzag_seed(params, amp)
    cfg = None
    for P in np.linspace(max(start, power), power, max(steps, 1) + 1):
        q = with_power(params, P)
        cfg = find_equilibrium(q, prev, escape_saddle=True)
        prev = cfg.positions
    return cfg


def _linear_stable(params, P) -> bool:
    q = with_power(params, P)
    try:
        cfg = find_equilibrium(q, linear_chain_seed(q))
    except ConvergenceError:
        return False
    return cfg.classification == "linear" and cfg.is_minimum


def _zigzag_stable(params, P, seed) -> bool:
    q = with_power(params, P)
    try:
        cfg = find_equilibrium(q, seed)
    except ConvergenceError:
        return False
    return cfg.classification == "zigzag" and cfg.is_minimum


def bistability_interval(table: BranchTable, rtol: float = BISTABILITY_RTOL):
    """[P_low, P_high] where a stable linear and a stable zigzag state coexist.

    Uses the longest contiguous run of bistable grid points, with both ends
    refined by bisection to relative precision ``rtol``. Returns None when the
    grid has no bistable point.
    """
    if len(table.powers) == 0:
        return None
    lin = table.branches.get("linear")
    zz = table.branches.get("zigzag")
    if lin is None or zz is None:
        raise ValueError("table needs both linear and zigzag branches")
    order = np.argsort(table.powers)
    P = table.powers[order]
    flags = np.array([lin[i].classification == "linear" and lin[i].stable and
                      zz[i].classification == "zigzag" and zz[i].stable for i in order])
    if not flags.any():
        return None
    best, start = (0, 0), None
    for i, f in enumerate(np.append(flags, False)):
        if f and start is None:
            start = i
        elif not f and start is not None:
            if i - start > best[1] - best[0]:
                best = (start, i)
            start = None
    i_lo, i_hi = best[0], best[1] - 1
    params = table.params

    def bistable(p, seed):
        return _linear_stable(params, p) and _zigzag_stable(params, p, seed)

    def refine(inside, outside, seed):
        while abs(inside - outside) > rtol * abs(inside):
            mid = 0.5 * (inside + outside)
            if bistable(mid, seed):
                inside = mid
            else:
                outside = mid
        return inside

    p_lo, p_hi = P[i_lo], P[i_hi]
    if i_lo > 0:
        p_lo = refine(P[i_lo], P[i_lo - 1], zz[order[i_lo]].configuration.positions)
    if i_hi < len(P) - 1:
        p_hi = refine(P[i_hi], P[i_hi + 1], zz[order[i_hi]].configuration.positions)
    return float(p_lo), float(p_hi)
