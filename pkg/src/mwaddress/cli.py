"""Batch command-line runner: one subcommand per scenario.

Each scenario reads a YAML or JSON config (frequencies in Hz, converted to
rad/s here; heating rates stay in quanta/s), writes CSV/JSON outputs plus a
``manifest.json`` into ``--out`` and exits 0 on success, 2 on a config
error and 3 when a simulation fails (a ``diagnostics.json`` is written).
"""
from __future__ import annotations

import argparse
import json
import math
import platform
import sys
import time
import traceback
from importlib import resources
from pathlib import Path
from typing import Callable, Literal

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from . import __version__
from .errors import ConvergenceError, SimulationError

TWO_PI = 2.0 * math.pi
EXIT_OK, EXIT_CONFIG, EXIT_SIM = 0, 2, 3


class _Config(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scenario: str | None = None
    fock_dim: int = Field(30, ge=2, le=200)
    rel_tol: float = Field(1e-8, ge=1e-12, le=1e-4)


class DecayScanConfig(_Config):
    omega_sb_hz: float = Field(380.0, gt=0)
    mode_freq_hz: float = Field(5.77e6, gt=0)
    n_bar: float = Field(0.0, ge=0)
    heating_rate: float = Field(370.0, ge=0)
    alpha_max: float = Field(2.5, gt=0)
    n_points: int = Field(51, ge=2)


class DdPhaseScanConfig(_Config):
    fock_dim: int = Field(12, ge=2, le=200)
    omega_sb_hz: float = Field(380.0, gt=0)
    dd_ratio: float = Field(60.0, gt=0)
    walsh_order: int = 3
    p0_target: float = Field(0.6, gt=0.5, le=1.0)
    phi_min: float = 0.0
    phi_max: float = math.pi
    n_points: int = Field(25, ge=2)


class FieldMapConfig(_Config):
    geometry_file: str | None = None
    rel_phase: float = 0.0480
    rel_amp: float = Field(0.856, gt=0)
    wire_offset: float = Field(40e-6, gt=0)
    ion_height: float = Field(40e-6, gt=0)
    weaker_side: int = 1
    tilt_deg: float | None = None
    mode_freq_hz: float = Field(5.77e6, gt=0)
    x_min: float = -20e-6
    x_max: float = 20e-6
    n_points: int = Field(401, ge=2)

    @field_validator("weaker_side")
    @classmethod
    def _side(cls, v):
        if v not in (1, -1):
            raise ValueError("weaker_side must be +1 or -1")
        return v


class ZoneScanConfig(FieldMapConfig):
    tilt_deg: float | None = 15.0
    alpha0: float = Field(1.3985, gt=0)
    threshold: float = Field(0.75, gt=0.5, lt=1.0)


class SuppressionScanConfig(_Config):
    fock_dim: int = Field(12, ge=2, le=200)
    rel_tol: float = Field(1e-9, ge=1e-12, le=1e-4)
    omega_sb_hz: float = Field(380.0, gt=0)
    ratios: list[float] = [10, 15, 20, 30, 50, 70, 100]
    walsh_order: int = 3
    p0_target: float = Field(0.6, gt=0.5, le=1.0)
    dd_ramp: float = Field(0.0, ge=0)
    sb_ramp: float = Field(0.0, ge=0)
    include_off_resonant: bool = False
    neighborhood: float = Field(1.0, ge=0)
    n_neighbors: int = Field(13, ge=1)


class ChainConfig(_Config):
    n_ions: int = Field(17, ge=2)
    spacing: float = Field(5e-6, gt=0)
    ion_height: float = Field(40e-6, gt=0)
    electrode_x: list[float] = [-40e-6, 0.0, 40e-6]
    epsilon: float = Field(3e-5, ge=0)
    axial_freq_hz: float = Field(200e3, gt=0)
    floor_target: float = Field(7e-5, gt=0)

    def spec(self):
        from .chain import ChainSpec
        from .lindblad import MotionalMode
        mode = MotionalMode.from_lab(self.axial_freq_hz, n_ions=self.n_ions)
        return ChainSpec(self.n_ions, self.spacing, self.ion_height, tuple(self.electrode_x),
                         self.epsilon, mode, self.floor_target)


class GateFidelityConfig(ChainConfig):
    fock_dim: int = Field(16, ge=2, le=200)
    rel_tol: float = Field(1e-9, ge=1e-12, le=1e-4)
    pair: tuple[int, int] = (4, 7)
    displacements_nm: list[float] = [-5, -2.5, 0, 2.5, 5]
    n_bars: list[float] = [0.0, 0.1, 0.3]
    gate_time: float = Field(250e-6, gt=0)
    walsh_order: int = 15
    dd_ramp: float = Field(120e-9, ge=0)
    sb_ramp: float = Field(2.4e-6, ge=0)
    with_dd: bool = True
    guard_tol: float | None = 1e-6


class RbConfig(_Config):
    fock_dim: int = Field(25, ge=2, le=200)
    rel_tol: float = Field(1e-9, ge=1e-12, le=1e-4)
    omega_sb_hz: float = Field(380.0, gt=0)
    omega_dd_hz: float = Field(152e3, ge=0)
    delta_hz: float = 770.0
    phi_dd: float = math.pi / 2
    mode_freq_hz: float = Field(5.77e6, gt=0)
    n_bar: float = Field(0.1, ge=0)
    heating_rate: float = Field(370.0, ge=0)
    gate_duration: float = Field(1.30e-3, gt=0)
    walsh_order: int = 15
    dd_ramp: float = Field(120e-9, ge=0)
    sb_ramp: float = Field(1.6e-6, ge=0)
    inter_pulse_delay: float = Field(24e-6, ge=0)
    trailing_delay: float = Field(100e-6, ge=0)
    lengths: list[int] = [1, 5, 10, 15, 20]
    n_seeds: int = Field(10, ge=1)
    control: bool = True
    method: Literal["channel", "exact"] = "channel"

    def build_scenario(self, phi_dd: float | None = None):
        from .benchmarking import RbScenario
        from .hamiltonians import DriveParams
        from .lindblad import MotionalMode
        drive = DriveParams(omega_sb=TWO_PI * self.omega_sb_hz, omega_dd=TWO_PI * self.omega_dd_hz,
                            delta=TWO_PI * self.delta_hz,
                            phi_dd=self.phi_dd if phi_dd is None else phi_dd)
        mode = MotionalMode(omega_m=TWO_PI * self.mode_freq_hz, n_bar=self.n_bar,
                            heating_rate=self.heating_rate)
        return RbScenario(drive, mode, "ms", self.gate_duration, self.walsh_order, self.dd_ramp,
                          self.sb_ramp, self.inter_pulse_delay, self.trailing_delay,
                          self.fock_dim, self.rel_tol)


# scenario runners --------------------------------------------------------------
# Each returns (files: {name: text}, summary: dict).

def _fmt_rows(header, rows) -> str:
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(f"{v:.12g}" if isinstance(v, float) else str(v) for v in r))
    return "\n".join(lines) + "\n"


def run_decay_scan(cfg: DecayScanConfig, seed: int):
    from .hamiltonians import DriveParams
    from .lindblad import MotionalMode, evolve, fit_alpha_scale, p0_analytic
    from .pulses import build_schedule
    omega = TWO_PI * cfg.omega_sb_hz
    t_max = 2 * cfg.alpha_max / omega
    sched = build_schedule(t_max, walsh_order=0, with_dd=False)
    drive = DriveParams(omega_sb=omega)
    times = np.linspace(0.0, t_max, cfg.n_points)
    cols, guards = {}, {}
    for label, rate in (("no_heating", 0.0), ("heating", cfg.heating_rate)):
        mode = MotionalMode(omega_m=TWO_PI * cfg.mode_freq_hz, n_bar=cfg.n_bar, heating_rate=rate)
        res = evolve(sched, drive, mode, np.array([1.0, 0.0]), rel_tol=cfg.rel_tol,
                     fock_dim=cfg.fock_dim, n_samples=cfg.n_points)
        cols[label] = np.interp(times, res.times, res.p0)
        cols[label + "_n"] = np.interp(times, res.times, res.n_mean)
        guards[label] = res.stats["guard_deviation"]
    alpha = omega * times / 2
    analytic = p0_analytic(alpha, cfg.n_bar)
    rows = [(float(t), float(a), float(p), float(x), float(y), float(n))
            for t, a, p, x, y, n in zip(times, alpha, analytic, cols["no_heating"],
                                        cols["heating"], cols["heating_n"])]
    csv_text = _fmt_rows(["t", "alpha", "P0_analytic", "P0_sim", "P0_sim_heating",
                          "n_mean_heating"], rows)
    dev = float(np.max(np.abs(cols["no_heating"] - analytic)))
    fits = {label: fit_alpha_scale(times, cols[label], omega, cfg.n_bar)
            for label in ("no_heating", "heating")}
    return {"decay.csv": csv_text}, {"max_abs_dev_no_heating": dev, "guard_deviation": guards,
                                     "alpha_scale_fit": {k: v[0] for k, v in fits.items()},
                                     "alpha_scale_stderr": {k: v[1] for k, v in fits.items()}}


def run_dd_phase_scan(cfg: DdPhaseScanConfig, seed: int):
    from .hamiltonians import DriveParams
    from .lindblad import MotionalMode, evolve, size_pulse
    from .pulses import build_schedule
    omega = TWO_PI * cfg.omega_sb_hz
    t = size_pulse(cfg.p0_target, omega, cfg.walsh_order)
    sched = build_schedule(t, cfg.walsh_order)
    rows, guard = [], 0.0
    for phi in np.linspace(cfg.phi_min, cfg.phi_max, cfg.n_points):
        drive = DriveParams(omega_sb=omega, omega_dd=cfg.dd_ratio * omega, phi_dd=float(phi))
        res = evolve(sched, drive, MotionalMode(), np.array([1.0, 0.0]), rel_tol=cfg.rel_tol,
                     fock_dim=cfg.fock_dim, n_samples=2)
        guard = max(guard, res.stats["guard_deviation"])
        rows.append((float(phi), res.p0_final))
    return ({"dd_phase.csv": _fmt_rows(["phi_dd", "P0"], rows)},
            {"pulse_duration": t, "guard_deviation": guard,
             "P0_min": min(r[1] for r in rows), "P0_max": max(r[1] for r in rows)})


def _geometry(cfg: FieldMapConfig):
    from .fieldmodel import TrapGeometry, measured_trap
    if cfg.geometry_file:
        return TrapGeometry.from_json(Path(cfg.geometry_file).read_text())
    return measured_trap(cfg.rel_phase, cfg.rel_amp, cfg.wire_offset, cfg.ion_height,
                         cfg.weaker_side, cfg.tilt_deg)


def run_field_map(cfg: FieldMapConfig, seed: int):
    from .fieldmodel import field_at, phase_profile
    from .lindblad import MotionalMode
    geom = _geometry(cfg)
    mode = MotionalMode.from_lab(cfg.mode_freq_hz)
    prof = phase_profile(geom, np.linspace(cfg.x_min, cfg.x_max, cfg.n_points), mode)
    centre = field_at(geom, 0.0, mode)
    return ({"field_map.csv": prof.to_csv(), "geometry.json": geom.to_json() + "\n"},
            {"field_phase_span": float(prof.phi_field[-1] - prof.phi_field[0]),
             "grad_phase_range": [float(prof.phi_grad.min()), float(prof.phi_grad.max())],
             "eta_at_centre": centre.eta})


def run_zone_scan(cfg: ZoneScanConfig, seed: int):
    from .fieldmodel import interaction_zone, phase_profile, zone_p0
    from .lindblad import MotionalMode
    geom = _geometry(cfg)
    mode = MotionalMode.from_lab(cfg.mode_freq_hz)
    prof = phase_profile(geom, np.linspace(cfg.x_min, cfg.x_max, cfg.n_points), mode)
    p0 = zone_p0(prof, alpha0=cfg.alpha0)
    zones = interaction_zone(prof, cfg.threshold, alpha0=cfg.alpha0)
    rows = [(float(x), float(a), float(b), float(p)) for x, a, b, p in
            zip(prof.x, prof.phi_field, prof.phi_grad, p0)]
    return ({"zone.csv": _fmt_rows(["x", "phi_field", "phi_grad", "P0"], rows)},
            {"zones": [list(z) for z in zones], "threshold": cfg.threshold})


def run_suppression_scan(cfg: SuppressionScanConfig, seed: int):
    from .lindblad import SuppressionScenario, suppression_error_scan
    sc = SuppressionScenario(omega_sb=TWO_PI * cfg.omega_sb_hz, p0_target=cfg.p0_target,
                             walsh_order=cfg.walsh_order, dd_ramp=cfg.dd_ramp,
                             sb_ramp=cfg.sb_ramp, fock_dim=cfg.fock_dim, rel_tol=cfg.rel_tol,
                             neighborhood=cfg.neighborhood, n_neighbors=cfg.n_neighbors,
                             include_off_resonant=cfg.include_off_resonant)
    scan = suppression_error_scan(cfg.ratios, sc)
    rows = [(s["ratio"], s["max_error"], s["bound"], s["peak_ratio"], s["envelope"]) for s in scan]
    samples = [(s["ratio"], float(x), float(e)) for s in scan for x, e in s["samples"]]
    return ({"suppression.csv": _fmt_rows(["ratio", "max_error", "bound", "peak_ratio",
                                           "envelope_over_bound"], rows),
             "suppression_samples.csv": _fmt_rows(["ratio", "sample_ratio", "error"], samples)},
            {"max_envelope_over_bound": max(r[4] for r in rows),
             "min_envelope_over_bound": min(r[4] for r in rows),
             "ratio_period": sc.ratio_period()})


def run_chain_crosstalk(cfg: ChainConfig, seed: int):
    from .chain import chain_crosstalk_map
    rep = chain_crosstalk_map(cfg.spec())
    s = rep.summary()
    return ({"crosstalk.json": rep.to_json() + "\n", "crosstalk_max.csv": rep.to_csv("max"),
             "crosstalk_mean.csv": rep.to_csv("mean")},
            {k: s[k] for k in ("chain_mean", "pooled_mean", "mean_of_pair_max", "cos_channel_mean",
                               "n_pairs", "unconverged_pairs")})


def run_gate_fidelity(cfg: GateFidelityConfig, seed: int):
    from .chain import GateScenario, gate_error_vs_position
    spec = cfg.spec()
    sc = GateScenario(cfg.gate_time, cfg.walsh_order, cfg.dd_ramp, cfg.sb_ramp, cfg.fock_dim,
                      cfg.rel_tol)
    rows = []
    for nb in cfg.n_bars:
        for d in cfg.displacements_nm:
            err = gate_error_vs_position(spec, tuple(cfg.pair), d * 1e-9, nb, sc, cfg.with_dd,
                                         cfg.guard_tol)
            rows.append((float(d), float(nb), float(err)))
    return ({"gate_fidelity.csv": _fmt_rows(["displacement_nm", "n_bar", "infidelity"], rows)},
            {"max_infidelity": max(r[2] for r in rows), "guard_tol": cfg.guard_tol})


def run_rb(cfg: RbConfig, seed: int):
    from .benchmarking import run_rb as _run_rb
    seeds = range(seed, seed + cfg.n_seeds)
    res = _run_rb(cfg.build_scenario(), seeds, cfg.lengths, method=cfg.method)
    files = {"rb.json": res.to_json() + "\n", "rb.csv": res.to_csv()}
    summary = {"epsilon": res.epsilon, "epsilon_err": res.epsilon_err, "fit_ok": res.fit_ok}
    if cfg.control:
        ctl = _run_rb(cfg.build_scenario(phi_dd=0.0), seeds, cfg.lengths, method=cfg.method)
        files["rb_control.csv"] = ctl.to_csv()
        files["rb_control.json"] = ctl.to_json() + "\n"
        summary["control_final_error"] = float(ctl.mean_error[-1])
    return files, summary


SCENARIOS: dict[str, tuple[type[_Config], Callable]] = {
    "decay-scan": (DecayScanConfig, run_decay_scan),
    "dd-phase-scan": (DdPhaseScanConfig, run_dd_phase_scan),
    "zone-scan": (ZoneScanConfig, run_zone_scan),
    "suppression-scan": (SuppressionScanConfig, run_suppression_scan),
    "chain-crosstalk": (ChainConfig, run_chain_crosstalk),
    "gate-fidelity": (GateFidelityConfig, run_gate_fidelity),
    "rb": (RbConfig, run_rb),
    "field-map": (FieldMapConfig, run_field_map),
}


# plumbing ---------------------------------------------------------------------

class ConfigError(Exception):
    pass


def default_config_text(name: str) -> str:
    return resources.files("mwaddress.configs").joinpath(f"{name}.yaml").read_text()


def load_config(name: str, path: str | None, overrides: dict) -> _Config:
    model, _ = SCENARIOS[name]
    try:
        text = Path(path).read_text() if path else default_config_text(name)
        raw = yaml.safe_load(text) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    if raw.get("scenario") not in (None, name):
        raise ConfigError(f"config is for scenario {raw['scenario']!r}, not {name!r}")
    raw.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return model.model_validate(raw)
    except ValidationError as exc:
        lines = [f"  {'.'.join(str(p) for p in e['loc'])}: {e['msg']}" for e in exc.errors()]
        raise ConfigError("invalid config:\n" + "\n".join(lines)) from exc


def _versions() -> dict:
    import numba
    import scipy
    return {"mwaddress": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__, "numba": numba.__version__}


def _write(out: Path, name: str, text: str) -> None:
    (out / name).write_text(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mwaddress", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in SCENARIOS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="YAML or JSON config (defaults to the shipped one)")
        s.add_argument("--out", default=f"out/{name}", help="output directory")
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--fock-dim", type=int, dest="fock_dim")
        s.add_argument("--tol", type=float, dest="rel_tol")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    name = args.command
    try:
        cfg = load_config(name, args.config, {"fock_dim": args.fock_dim, "rel_tol": args.rel_tol})
    except ConfigError as exc:
        print(f"mwaddress {name}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"scenario": name, "config": cfg.model_dump(mode="json"), "seed": args.seed,
                "versions": _versions()}
    t0 = time.perf_counter()
    try:
        files, summary = SCENARIOS[name][1](cfg, args.seed)
    except (SimulationError, ArithmeticError) as exc:
        diag = {**manifest, "error": type(exc).__name__, "message": str(exc),
                "traceback": traceback.format_exc(), "runtime_s": time.perf_counter() - t0}
        if isinstance(exc, ConvergenceError):
            diag["guard"] = {"observable": exc.observable, "deviation": exc.deviation,
                             "tolerance": exc.tolerance}
        _write(out, "diagnostics.json", json.dumps(diag, indent=2, sort_keys=True) + "\n")
        print(f"mwaddress {name}: simulation failed: {exc}", file=sys.stderr)
        return EXIT_SIM
    for fname in sorted(files):
        _write(out, fname, files[fname])
    manifest.update({"runtime_s": time.perf_counter() - t0, "summary": summary,
                     "outputs": sorted(files)})
    _write(out, "manifest.json", json.dumps(manifest, indent=2, sort_keys=True, default=float) + "\n")
    print(json.dumps(summary, sort_keys=True, default=float))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
