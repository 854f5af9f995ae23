"""Command-line front end: ``ioncavity <command> --config file.toml --out dir``."""
from __future__ import annotations

import functools
import logging
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__, plot
from .config import FIGURES, ConfigError, RunConfig, bundled_config, from_dict, load_config
from .crystal import critical_frequency, find_equilibrium, linear_chain_seed, zigzag_seed
from .linearized import drift_matrix, normal_modes, stability_report, zigzag_mode_index
from .output import RunManifest, params_dict, write_json, write_table
from .params import cooperativity, n_eff, pump_conversions, u0, with_power
from .softmode import theta_parameter, threshold_power, uniform_potential, v_s_projected
from .steadystate import (assign_peaks, default_nu_grid, find_peaks, log_negativity, mode_occupations, refined_nu_grid,
                          solve_covariance, spectrum_closed_form, spectrum_modal)
from .sweep import bistability_interval, equilibrium_on_branch, hysteresis, sweep_power

log = logging.getLogger("ioncavity")


def _grid(sec: dict, lo=1e-3, hi=1.0, n=200, spacing="log"):
    if "powers" in sec:
        return np.asarray(sec["powers"], dtype=float)
    lo, hi = float(sec.get("power_min", lo)), float(sec.get("power_max", hi))
    n = int(sec.get("points", n))
    if sec.get("spacing", spacing) == "log":
        return np.geomspace(lo, hi, n)
    return np.linspace(lo, hi, n)


def _stem(panel, name):
    return f"{panel}_{name}" if panel else name


class Run:
    """Output directory, format and manifest shared by one command invocation."""

    def __init__(self, command, cfg: RunConfig, out, fmt, make_plots, threads):
        self.cfg, self.out, self.fmt, self.plot, self.threads = cfg, Path(out), fmt, make_plots, threads
        self.out.mkdir(parents=True, exist_ok=True)
        resolved = {name or "main": params_dict(c.params()) for name, c in cfg.panel_items()}
        self.manifest = RunManifest(cfg.source, command, {"config": cfg.as_dict(), "resolved": resolved},
                                    str(self.out))
        self.files = []

    def table(self, stem, columns, rows, notes=(), extra=None):
        self.files.append(write_table(self.out, stem, columns, rows, self.manifest, self.fmt, notes, extra))

    def json(self, stem, payload):
        self.files.append(write_json(self.out / f"{stem}.json", payload, self.manifest))

    def svg(self, fn, stem, *args, **kw):
        if self.plot:
            self.files.append(fn(self.out / f"{stem}.svg", *args, **kw))

    def close(self):
        self.manifest.finish()
        self.files.append(self.manifest.write(self.out))
        for f in self.files:
            click.echo(f"wrote {f}")


# --- command bodies -----------------------------------------------------------

def _state(cfg: RunConfig):
    """Equilibrium for the single-power commands, following the configured branch."""
    params = cfg.params()
    sec = cfg.section("state")
    branch = sec.get("branch", "zigzag")
    power = float(sec.get("power", pump_conversions(params)["P"]))
    cfg_ = equilibrium_on_branch(params, power, branch, sec.get("start_power"), int(sec.get("steps", 40)))
    return with_power(params, power), cfg_, power


def do_equilibrium(run: Run, panel, cfg):
    params = cfg.params()
    sec = cfg.section("equilibrium")
    seed = sec.get("seed", "linear")
    if seed == "linear":
        eq = find_equilibrium(params, linear_chain_seed(params), escape_saddle=bool(sec.get("escape_saddle", False)))
    elif seed == "zigzag" and "start_power" in sec:
        eq = equilibrium_on_branch(params, pump_conversions(params)["P"], "zigzag", float(sec["start_power"]))
    elif seed == "zigzag":
        amp = float(sec.get("zigzag_amplitude_k", 2.0)) / params.k
        eq = find_equilibrium(params, zigzag_seed(params, amp), escape_saddle=True)
    else:
        raise ConfigError(f"unknown seed {seed!r}")
    mf = eq.mean_field
    notes = [f"classification: {eq.classification}", f"is_minimum: {int(eq.is_minimum)}",
             f"potential_energy_J: {eq.potential_energy:.17g}", f"gradient_norm_N: {eq.gradient_norm:.3g}",
             f"a_bar: {mf.a_bar:.17g}", f"delta_eff_rad_s: {mf.delta_eff:.17g}",
             f"n_eff: {n_eff(params, eq.positions):.17g}", f"cooperativity: {cooperativity(params, eq.positions):.17g}"]
    rows = [(j + 1, x, y) for j, (x, y) in enumerate(eq.positions)]
    run.table(_stem(panel, "equilibrium"), [("ion", "1"), ("x", "m"), ("y", "m")], rows, notes,
              extra={"configuration": eq.to_dict()})
    run.svg(plot.positions, _stem(panel, "equilibrium"), eq.positions * 1e6, eq.classification)
    click.echo(f"{panel or 'equilibrium'}: {eq.classification}, minimum={eq.is_minimum}")


def do_critical(run: Run, panel, cfg):
    params = cfg.params()
    wc = critical_frequency(params)
    click.echo(f"{panel + ': ' if panel else ''}omega_crit/2pi = {wc / 2 / np.pi / 1e6:.6f} MHz "
               f"(N = {params.n_ions}, omega_y/2pi = {params.omega_y / 2 / np.pi / 1e6:.6g} MHz)")
    run.table(_stem(panel, "critical"),
              [("n_ions", "1"), ("omega_y/2pi", "Hz"), ("omega_crit/2pi", "Hz"), ("omega_crit/omega_y", "1")],
              [(params.n_ions, params.omega_y / (2 * np.pi), wc / (2 * np.pi), wc / params.omega_y)])


def do_landau(run: Run, panel, cfg):
    params = cfg.params()
    sec = cfg.section("landau")
    mode = sec.get("mode", "uniform")
    points = int(sec.get("points", 400))
    half = float(sec.get("b_range_pi", 1.5)) * np.pi / params.k
    b = np.linspace(-half, half, points)
    scale = params.ion_mass * params.omega_x ** 2 / params.k ** 2
    curves, minima, series = [], [], {}
    if mode == "uniform":
        theta = float(sec["theta"]) if "theta" in sec else theta_parameter(params)
        for C in sec.get("cooperativities", [1.0]):
            for P in sec.get("powers", [0.0, 0.1, 0.2]):
                pot = uniform_potential(theta, P, C, params, b)
                curves += [(C, P, bi * params.k, bi, v, v / scale) for bi, v in zip(b, pot.values)]
                minima.append((C, P, len(pot.minima), pot.stability_class, threshold_power(theta, C)))
                series[f"C={C:g}, P={P:g}"] = pot.values / scale
        notes = [f"theta: {theta:.17g}"]
    elif mode == "projected":
        C = cooperativity(params, linear_chain_seed(params))
        for P in sec.get("powers", [0.0, 0.1, 0.2]):
            pot = v_s_projected(with_power(params, P), b)
            curves += [(C, P, bi * params.k, bi, v, v / scale) for bi, v in zip(b, pot.values)]
            minima.append((C, P, len(pot.minima), pot.stability_class, np.nan))
            series[f"P={P:g}"] = pot.values / scale
        notes = [f"cooperativity: {C:.17g}", "cavity term relative to the linear chain's trap+Coulomb energy"]
    else:
        raise ConfigError(f"unknown landau mode {mode!r}")
    run.table(_stem(panel, "landau"), [("C", "1"), ("P", "P0"), ("kb", "1"), ("b", "m"), ("V_s", "J"),
                                        ("V_s/(m omega_x^2/k^2)", "1")], curves, notes)
    run.table(_stem(panel, "landau_minima"), [("C", "1"), ("P", "P0"), ("n_minima", "1"), ("class", "-"),
                                               ("threshold_P", "P0")], minima)
    run.svg(plot.lines, _stem(panel, "landau"), b * params.k, series, "kb", "V_s / (m omega_x^2 / k^2)")


def do_sweep(run: Run, panel, cfg):
    params = cfg.params()
    sec = cfg.section("sweep")
    P = _grid(sec)
    table = sweep_power(params, P, with_entanglement=bool(sec.get("entanglement", False)), threads=run.threads,
                        zigzag_amplitude=sec.get("zigzag_amplitude_k"))
    interval = bistability_interval(table)
    notes = [f"I_0_photons_per_s: {table.reference_intensity:.17g}",
             "bistable_interval: " + ("none" if interval is None else f"{interval[0]:.17g} {interval[1]:.17g}"),
             "zigzag branch followed downward in P; 1e-3/k zigzag kick when reseeding from a linear chain"]
    run.table(_stem(panel, "branches"),
              [("P", "P0"), ("branch", "-"), ("class", "-"), ("I_out/I_0", "1"), ("delta_eff", "rad/s"),
               ("stable", "bool"), ("E_N", "ebit")], table.rows(), notes)
    pos_rows = []
    for name, pts in table.branches.items():
        for p in pts:
            if p.configuration is not None:
                pos_rows += [(p.power, name, j + 1, x, y) for j, (x, y) in enumerate(p.configuration.positions)]
    run.table(_stem(panel, "positions"), [("P", "P0"), ("branch", "-"), ("ion", "1"), ("x", "m"), ("y", "m")],
              pos_rows)
    series = {name: [p.intensity for p in pts] for name, pts in table.branches.items()}
    if sec.get("hysteresis", True):
        h = hysteresis(params, P)
        run.table(_stem(panel, "hysteresis"), [("P", "P0"), ("trace", "-"), ("class", "-"), ("I_out/I_0", "1"),
                                               ("delta_eff", "rad/s"), ("stable", "bool")], h.rows(),
                  [f"loop_area: {h.loop_area:.17g}"])
        series["up"] = [p.intensity for p in h.up]
        series["down"] = [p.intensity for p in h.down]
    run.svg(plot.lines, _stem(panel, "sweep"), P, series, "P / P0", "I_out / I_0")
    click.echo(f"{panel or 'sweep'}: bistable interval = {interval}")


def do_modes(run: Run, panel, cfg):
    params, eq, power = _state(cfg)
    modes = normal_modes(params, eq)
    drift = drift_matrix(params, eq, modes)
    rep = stability_report(drift)
    iz = zigzag_mode_index(modes, eq)
    rows = [(n, f, f * 2 * np.pi / params.omega_y, c, g, nb) for n, f, c, g, nb in modes.rows()]
    notes = [f"P: {power:.17g}", f"classification: {eq.classification}", f"zigzag_mode: {iz + 1}",
             f"U0/kappa: {eq.mean_field.u0 / params.kappa:.17g}",
             f"U0_ratio_to_linear: {eq.mean_field.u0 / u0(params, linear_chain_seed(params)):.17g}",
             f"delta_eff_rad_s: {drift.delta_eff:.17g}", f"a_bar: {drift.a_bar:.17g}",
             f"stable: {int(rep.stable)}", f"max_re_lambda_per_s: {rep.max_real_part:.17g}"]
    run.table(_stem(panel, "modes"), [("mode", "1"), ("omega/2pi", "Hz"), ("omega/omega_y", "1"), ("c", "rad/s"),
                                      ("Gamma", "1/s"), ("N_bath", "1")], rows, notes)
    run.json(_stem(panel, "drift"), {"drift": {"basis": drift.basis, "M": drift.M, "D": drift.D},
                                     "eigenvalues_re": rep.eigenvalues.real, "eigenvalues_im": rep.eigenvalues.imag})
    run.svg(plot.lines, _stem(panel, "modes"), np.arange(1, modes.n_modes + 1),
            {"|c_n|": np.abs(modes.couplings)}, "mode", "|c_n| (rad/s)", markers=True)


def do_steadystate(run: Run, panel, cfg):
    params, eq, power = _state(cfg)
    modes = normal_modes(params, eq)
    result = solve_covariance(drift_matrix(params, eq, modes))
    table = mode_occupations(result, modes)
    iz = zigzag_mode_index(modes, eq)
    notes = [f"P: {power:.17g}", f"classification: {eq.classification}",
             f"cavity_fluctuation_occupation: {result.cavity_occupation:.17g}",
             f"lyapunov_residual: {result.lyapunov_residual:.3g}",
             f"E_N_all: {log_negativity(result, 'all'):.17g}",
             f"E_N_zigzag_mode_{iz + 1}: {log_negativity(result, [iz + 1]):.17g}"]
    rows = [(r["mode"], r["frequency_hz"], r["occupation"], r["bath_occupation"], r["coupled"]) for r in table]
    run.table(_stem(panel, "occupations"), [("mode", "1"), ("omega/2pi", "Hz"), ("occupation", "quanta"),
                                            ("N_bath", "quanta"), ("coupled", "bool")], rows, notes)
    run.svg(plot.bars, _stem(panel, "occupations"), [str(r["mode"]) for r in table],
            [r["occupation"] for r in table], "<b^dag b>", [r["bath_occupation"] for r in table])


def do_spectrum(run: Run, panel, cfg):
    params, eq, power = _state(cfg)
    sec = cfg.section("spectrum")
    if sec.get("zero_heating", False):
        params = params.with_(heating_rates=0.0)
    modes = normal_modes(params, eq)
    drift = drift_matrix(params, eq, modes)
    nu = default_nu_grid(modes, int(sec.get("points", 4001)))
    if sec.get("refine", True):
        nu = refined_nu_grid(drift, nu)
    s_closed = spectrum_closed_form(params, eq.mean_field, modes, nu).S
    s_modal = spectrum_modal(drift, nu).S
    wy = params.omega_y
    rel = float(np.max(np.abs(s_closed - s_modal) / np.abs(s_closed)))
    rows = [(v / wy, v, a * wy, b * wy) for v, a, b in zip(nu, s_closed, s_modal)]
    notes = [f"P: {power:.17g}", f"classification: {eq.classification}",
             f"max_relative_difference_between_forms: {rel:.3g}", "Rayleigh peak at nu = 0 not included"]
    run.table(_stem(panel, "spectrum"), [("nu/omega_y", "1"), ("nu", "rad/s"), ("S_closed*omega_y", "1"),
                                         ("S_modal*omega_y", "1")], rows, notes)
    peaks = find_peaks(nu, s_closed)
    labels = assign_peaks(drift, nu[peaks])  # 0 marks the cavity background
    peak_rows = [(nu[i] / wy, s_closed[i] * wy, n, "anti-Stokes" if nu[i] > 0 else "Stokes")
                 for i, n in zip(peaks, labels)]
    run.table(_stem(panel, "peaks"), [("nu/omega_y", "1"), ("S*omega_y", "1"), ("mode", "1"), ("side", "-")],
              peak_rows)
    run.svg(plot.lines, _stem(panel, "spectrum"), nu / wy, {"S": s_closed * wy}, "nu / omega_y", "S omega_y",
            logy=True)
    sidebands = sorted({int(r[2]) for r in peak_rows if r[2]})
    click.echo(f"{panel or 'spectrum'}: sideband peaks of modes {sidebands}, forms agree to {rel:.2g}")


def do_entangle(run: Run, panel, cfg):
    params = cfg.params()
    sec = cfg.section("entangle")
    P = _grid(sec, 0.01, 1.0, 60, "linear")
    table = sweep_power(params, P, seeds=("zigzag",), with_entanglement=True, threads=run.threads,
                        zigzag_amplitude=sec.get("zigzag_amplitude_k"))
    pts = table.branches["zigzag"]
    rows = [(p.power, p.classification, p.stable, p.log_negativity, p.log_negativity_zigzag) for p in pts]
    run.table(_stem(panel, "entanglement"), [("P", "P0"), ("class", "-"), ("stable", "bool"), ("E_N_all", "ebit"),
                                             ("E_N_zigzag", "ebit")], rows,
              ["zigzag branch only; E_N is empty at unstable points"])
    run.svg(plot.lines, _stem(panel, "entanglement"), P,
            {"all modes": [r[3] for r in rows], "zigzag mode": [r[4] for r in rows]}, "P / P0", "E_N")


COMMANDS = {
    "equilibrium": do_equilibrium, "critical": do_critical, "landau": do_landau, "sweep": do_sweep,
    "modes": do_modes, "steadystate": do_steadystate, "spectrum": do_spectrum, "entangle": do_entangle,
}


def execute(command: str, cfg: RunConfig, out, fmt="csv", make_plots=False, threads=1):
    """Run one command over every panel of ``cfg``; returns the written paths."""
    run = Run(command, cfg, out, fmt, make_plots, threads)
    for panel, sub in cfg.panel_items():
        COMMANDS[command](run, panel, sub)
    run.close()
    return run.files


# --- click wiring -------------------------------------------------------------

PHYSICS_ERRORS = (ValueError, RuntimeError, ArithmeticError, np.linalg.LinAlgError)


def _common(fn):
    @click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                  help="TOML or JSON config; defaults to built-in parameters.")
    @click.option("--out", type=click.Path(file_okay=False), default="out", show_default=True,
                  help="Output directory.")
    @click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
    @click.option("--plot", "make_plots", is_flag=True, help="Also write SVG plots.")
    @click.option("--threads", type=click.IntRange(min=1), default=1, show_default=True,
                  help="Cap on worker threads.")
    @functools.wraps(fn)
    def wrapper(**kw):
        return fn(**kw)
    return wrapper


def _guarded(command, config_path, out, fmt, make_plots, threads, cfg=None):
    try:
        if cfg is None:
            cfg = load_config(config_path) if config_path else from_dict({}, "<defaults>")
        execute(command, cfg, out, fmt, make_plots, threads)
    except ConfigError as exc:
        raise click.UsageError(str(exc))
    except PHYSICS_ERRORS as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        sys.exit(1)


@click.group()
@click.version_option(__version__, prog_name="ioncavity")
@click.option("-v", "--verbose", count=True, help="More log output (repeatable).")
def main(verbose):
    """Ion chain in a pumped optical cavity: structure, bistability, fluctuations."""
    level = logging.WARNING - 10 * verbose
    logging.basicConfig(level=max(level, logging.DEBUG), format="%(levelname)s %(name)s: %(message)s")


def _make_command(name, doc):
    @main.command(name, help=doc)
    @_common
    def cmd(config_path, out, fmt, make_plots, threads):
        _guarded(name, config_path, out, fmt, make_plots, threads)
    return cmd


for _name, _doc in [
    ("equilibrium", "Solve for one equilibrium configuration."),
    ("critical", "Free-space critical transverse frequency of the linear chain."),
    ("landau", "Soft-mode potential curves and their minima."),
    ("sweep", "Linear/zigzag branches, hysteresis and bistability versus pump power."),
    ("modes", "Normal-mode frequencies and cavity couplings at one pump power."),
    ("steadystate", "Steady-state mode occupations."),
    ("spectrum", "Cavity output spectrum from both formulas."),
    ("entangle", "Cavity-motion log-negativity versus pump power on the zigzag branch."),
]:
    _make_command(_name, _doc)


_RECIPES = {
    "fig2": ["landau"], "fig3": ["critical", "landau", "sweep"], "fig4": ["critical", "sweep"],
    "fig5": ["modes"], "fig6": ["steadystate"], "fig7": ["spectrum"], "fig8": ["entangle"],
}


@main.command()
@click.argument("figure", type=click.Choice(FIGURES))
@click.option("--out", type=click.Path(file_okay=False), default="out", show_default=True)
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
@click.option("--plot", "make_plots", is_flag=True)
@click.option("--threads", type=click.IntRange(min=1), default=1, show_default=True)
def reproduce(figure, out, fmt, make_plots, threads):
    """Run the bundled config for one figure into OUT/FIGURE."""
    cfg = bundled_config(figure)
    for command in _RECIPES[figure]:
        _guarded(command, None, Path(out) / figure / command, fmt, make_plots, threads, cfg=cfg)


if __name__ == "__main__":
    main()
