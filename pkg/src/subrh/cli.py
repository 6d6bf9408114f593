"""Scenario runner and command line entry point.

Config files are plain key=value lines with one nesting level
(section.key=value); '#' starts a comment. Flags override config keys. Each
run writes records.csv, summary.json, manifest.json, optional snapshots/,
and plots/ (gnuplot scripts plus rendered PNGs). Exit codes: 0 when every
verdict passes, 1 on runtime aborts or failed verdicts (partial outputs are
kept), 2 on config errors.
"""

import argparse
import csv
import hashlib
import json
import math
import os
import platform
import sys
from dataclasses import dataclass, field

import matplotlib
import numpy as np

from . import __version__, flow, ops, plots
from .crgeom import smooth_test_field
from .diagnostics import (
    DiagnosticsRecord,
    Verdict,
    cc_ball_volume,
    energies,
    fit_loglog,
    geodesic_homotopy_suite,
    heat_kernel_probe,
    map_distance,
    monotonicity_report,
    winding_numbers,
)
from .fields import Grid, MapField, write_snapshot
from .flow import FlowAbort, FlowState, SolverError, StopCriteria
from .ops import StabilityError, dt_max
from .targets import ChartGuardError, EuclideanK, TubeViolationError, is_chart, make_target


class ConfigError(Exception):
    """Invalid or inconsistent run configuration."""


SCENARIOS = (
    "heat",
    "flow",
    "picard",
    "homotopy",
    "kernel_probe",
    "cc_ball",
    "distance_monotone",
)

_COMMON_KEYS = {
    "scenario", "grid_n", "dt", "seed", "record_every", "out_dir",
    "target", "mode", "integrator",
}
_SECTIONS = {"target", "stop", "heat", "flow", "picard", "homotopy",
             "kernel", "cc_ball", "distance"}
_STOP_KEYS = {"tau_tol_l2", "tau_tol_sup", "t_max", "plateau_window", "plateau_delta"}

FIXED_COLUMNS = ("t", "E_H", "E_R", "E", "tau_l2", "tau_sup", "rho_l2")

RUNTIME_ERRORS = (StabilityError, SolverError, TubeViolationError, ChartGuardError)


def _coerce(text):
    text = text.strip()
    for kind in (int, float):
        try:
            return kind(text)
        except ValueError:
            pass
    low = text.lower()
    if low == "true":
        return True
    if low == "false":
        return False
    return text


def parse_config(path):
    """Read a key=value config file into a flat mapping."""
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    flat = {}
    for lineno, line in enumerate(lines, 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {body!r}")
        key, value = body.split("=", 1)
        key = key.strip()
        if not key or key.count(".") > 1:
            raise ConfigError(f"{path}:{lineno}: bad key {key!r}")
        flat[key] = _coerce(value)
    return flat


@dataclass
class RunConfig:
    """Typed view of a flat config mapping; `flat` is the manifest echo."""

    scenario: str = "flow"
    grid_n: int = 16
    dt: object = "auto"
    seed: int = 0
    record_every: int = 1
    out_dir: str = "run_out"
    target: str = "clifford"
    mode: str = "extrinsic"
    integrator: str = "explicit"
    target_params: dict = field(default_factory=dict)
    stop: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    flat: dict = field(default_factory=dict)

    @classmethod
    def from_flat(cls, flat):
        cfg = cls()
        cfg.flat = dict(flat)
        for key, value in flat.items():
            if "." in key:
                section, sub = key.split(".", 1)
                if section not in _SECTIONS:
                    raise ConfigError(f"unknown config section {section!r}")
                if section == "target":
                    cfg.target_params[sub] = value
                elif section == "stop":
                    if sub not in _STOP_KEYS:
                        raise ConfigError(f"unknown stop criterion {sub!r}")
                    cfg.stop[sub] = value
                else:
                    cfg.params.setdefault(section, {})[sub] = value
            else:
                if key not in _COMMON_KEYS:
                    raise ConfigError(f"unknown config key {key!r}")
                setattr(cfg, key, value)
        cfg.validate()
        return cfg

    def validate(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if not isinstance(self.grid_n, int) or self.grid_n < 8:
            raise ConfigError("grid_n must be an integer >= 8")
        if self.dt != "auto":
            if not isinstance(self.dt, (int, float)) or self.dt <= 0:
                raise ConfigError("dt must be positive or 'auto'")
            bound = dt_max(1.0 / self.grid_n)
            if self.integrator == "explicit" and self.dt > bound * (1.0 + 1e-12):
                raise ConfigError(
                    f"dt={self.dt:g} exceeds the explicit stability bound {bound:g}"
                )
        if self.integrator not in ("explicit", "imex"):
            raise ConfigError(f"unknown integrator {self.integrator!r}")
        if self.mode not in ("extrinsic", "intrinsic"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        if not isinstance(self.record_every, int) or self.record_every < 1:
            raise ConfigError("record_every must be a positive integer")
        for key, value in self.stop.items():
            if not isinstance(value, (int, float)):
                raise ConfigError(f"stop.{key} must be numeric")
        if self.scenario in ("flow", "picard", "homotopy", "distance_monotone"):
            target = self.make_target()
            if is_chart(target) and self.mode == "extrinsic":
                raise ConfigError(f"target {self.target!r} needs mode=intrinsic")
            if not is_chart(target) and self.mode == "intrinsic":
                raise ConfigError(f"target {self.target!r} needs mode=extrinsic")
            if self.scenario == "homotopy" and self.target != "clifford":
                raise ConfigError("the homotopy scenario runs on target=clifford")
            if self.target == "torus_chart" and self.scenario != "homotopy":
                raise ConfigError(
                    "torus_chart offers distance and winding utilities only; "
                    "flow the clifford embedding instead"
                )

    def make_target(self):
        try:
            return make_target(self.target, **self.target_params)
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc

    def resolve_dt(self, h):
        return dt_max(h) if self.dt == "auto" else float(self.dt)

    def section(self, name):
        return self.params.get(name, {})


@dataclass
class ScenarioResult:
    records: list
    extra_columns: list
    summary: dict
    verdicts: list
    snapshots: list


def _parse_tuple(value, count, kind, what):
    if isinstance(value, (int, float)) and count == 1:
        return (kind(value),)
    parts = [p for p in str(value).replace(",", " ").split() if p]
    if len(parts) != count:
        raise ConfigError(f"{what} needs {count} comma-separated values")
    try:
        return tuple(kind(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"bad {what}: {exc}") from exc


def _l2(a, g):
    return math.sqrt(max(ops._integrate(a * a, g), 0.0))


def _scalar_record(u, g, t, extra):
    """DiagnosticsRecord for a scalar heat state (K=1 map into the line)."""
    m = MapField(g, u[None])
    E_H, E_R, E_total, _ = energies(m, EuclideanK(1))
    lap = ops._lap(u, g)
    return DiagnosticsRecord(
        t=t,
        E_H=E_H,
        E_R=E_R,
        E_total=E_total,
        tau_l2=_l2(lap, g),
        tau_sup=float(np.max(np.abs(lap))),
        rho_l2=0.0,
        slacks=dict(extra),
    )


def _scn_heat(cfg):
    g = Grid(cfg.grid_n)
    dt = cfg.resolve_dt(g.h)
    sec = cfg.section("heat")
    steps = int(sec.get("steps", 2000))
    mass_tol = float(sec.get("mass_tol", 1e-12))
    f = smooth_test_field(g, seed=cfg.seed)
    u = f - float(np.min(f)) + 0.1
    mass0 = ops._integrate(u, g)
    drift = 0.0
    records = []
    for step in range(steps + 1):
        mass = ops._integrate(u, g)
        drift = max(drift, abs(mass - mass0))
        if step % cfg.record_every == 0 or step == steps:
            records.append(_scalar_record(u, g, step * dt, {"mass_dev": mass - mass0}))
        if step < steps:
            u = ops._heat_step(u, g, dt)
    verdict = Verdict("mass_conservation", drift <= mass_tol, mass_tol - drift, mass_tol)
    summary = {"mass_drift": drift, "mass0": mass0, "steps": steps, "dt": dt}
    snap = MapField(g, u[None])
    return ScenarioResult(records, ["mass_dev"], summary, [verdict],
                          [("final.bin", snap, steps * dt)])


def _flow_setup(cfg):
    g = Grid(cfg.grid_n)
    target = cfg.make_target()
    sec = cfg.section("flow")
    winding = _parse_tuple(sec.get("winding", "1,0,0,1"), 4, int, "flow.winding")
    u0 = flow.initial_map(
        g,
        target,
        mode=cfg.mode,
        seed=cfg.seed,
        winding=winding,
        amplitude=float(sec.get("amplitude", 0.3)),
        z_amp=float(sec.get("z_amp", 0.6)),
    )
    state = FlowState(
        u=u0,
        target=target,
        mode=cfg.mode,
        reproject_every=int(sec.get("reproject_every", 1)),
    )
    return g, target, state, sec


def _scn_flow(cfg):
    g, target, state, sec = _flow_setup(cfg)
    torus = cfg.target == "clifford"
    w0 = res0 = None
    if torus:
        w0, res0 = winding_numbers(state.u, target)
    stop = StopCriteria(**cfg.stop)
    dt = None if cfg.dt == "auto" else float(cfg.dt)
    state, records = flow.run_flow(
        state, stop, record_every=cfg.record_every, integrator=cfg.integrator, dt=dt
    )
    verdicts = []
    summary = {
        "reason": records[-1].reason,
        "t_final": state.t,
        "steps": state.step,
        "E_H_final": records[-1].E_H,
        "E_R_final": records[-1].E_R,
        "tau_l2_final": records[-1].tau_l2,
    }
    if len(records) >= 2:
        mono = monotonicity_report(records, burn_in_time=float(sec.get("burn_in", 0.015)))
        verdicts.append(mono.verdicts["eh_nonincreasing"])
        summary["eh_slack_min"] = mono.eh_slack_min
        summary["d1_resid_max"] = mono.d1_resid_max
        summary["convex_min"] = mono.convex_min
    if torus:
        wf, resf = winding_numbers(state.u, target)
        same = bool(np.array_equal(w0, wf))
        resk = max(res0, resf)
        verdicts.append(Verdict("winding_preserved", same and resk < 0.1,
                                (0.1 - resk) if same else -1.0, 0.1))
        summary["winding_initial"] = w0.tolist()
        summary["winding_final"] = wf.tolist()
    return ScenarioResult(records, ["eh_slack", "d1_resid"], summary, verdicts,
                          [("final.bin", state.u, state.t)])


def _scn_picard(cfg):
    g = Grid(cfg.grid_n)
    target = cfg.make_target()
    sec = cfg.section("picard")
    t_horizon = float(sec.get("t_horizon", 0.002))
    k_max = int(sec.get("k_max", 5))
    ratio_bound = float(sec.get("ratio_bound", 0.5))
    # winding in one block only: heat propagation contracts every wound
    # block toward its centroid, and the unprojected trajectory must stay
    # inside the 0.25 tube for the whole horizon
    winding = _parse_tuple(sec.get("winding", "1,0,0,0"), 4, int, "picard.winding")
    u0 = flow.initial_map(
        g,
        target,
        mode=cfg.mode,
        seed=cfg.seed,
        winding=winding,
        amplitude=float(sec.get("amplitude", 0.1)),
        z_amp=float(sec.get("z_amp", 0.1)),
    )
    dt = None if cfg.dt == "auto" else float(cfg.dt)
    iterates, ratios = flow.duhamel_picard(
        u0, t_horizon, k_max, target, mode=cfg.mode, dt=dt
    )
    records = []
    for k, it in enumerate(iterates):
        E_H, E_R, E_total, _ = energies(it, target, cfg.mode)
        taut = flow.tangential_tension(it, target, cfg.mode).data
        rho = target.rho(it.data) if not is_chart(target) else np.zeros(1)
        ratio = ratios[k - 2] if k >= 2 else 0.0
        records.append(
            DiagnosticsRecord(
                t=float(k),
                E_H=E_H,
                E_R=E_R,
                E_total=E_total,
                tau_l2=math.sqrt(max(ops._integrate(np.sum(taut * taut, axis=0), g), 0.0)),
                tau_sup=float(np.max(np.sqrt(np.sum(taut * taut, axis=0)))),
                rho_l2=math.sqrt(max(ops._integrate(np.sum(rho * rho, axis=0), g), 0.0))
                if not is_chart(target)
                else 0.0,
                slacks={"picard_ratio": ratio},
            )
        )
    worst = max(ratios) if ratios else 0.0
    verdict = Verdict("picard_contraction", worst <= ratio_bound, ratio_bound - worst,
                      ratio_bound)
    summary = {"ratios": list(ratios), "t_horizon": t_horizon, "k_max": k_max}
    return ScenarioResult(records, ["picard_ratio"], summary, [verdict],
                          [("final.bin", iterates[-1], t_horizon)])


def _scn_homotopy(cfg):
    g = Grid(cfg.grid_n)
    target = cfg.make_target()
    sec = cfg.section("homotopy")
    s_count = int(sec.get("s_count", 8))
    shift = _parse_tuple(sec.get("shift", "0.8,0.45"), 2, float, "homotopy.shift")
    tau_tol = float(sec.get("tau_tol", 1e-6))
    c_dev = float(sec.get("c_dev", 1.0))
    winding = _parse_tuple(sec.get("winding", "1,0,0,1"), 4, int, "homotopy.winding")
    u = flow.reference_torus_map(g, winding)
    v = MapField(g, target.translate(u.data, shift))
    suite = geodesic_homotopy_suite(u, v, s_count, target, cfg.mode, tau_tol=tau_tol)
    records = []
    for j, s in enumerate(suite.s_values):
        phi = MapField(g, target.geodesic_interp(u.data, v.data, float(s)))
        E_H, E_R, E_total, _ = energies(phi, target, cfg.mode)
        rho = target.rho(phi.data)
        d_from_u = map_distance(u, phi, target)
        records.append(
            DiagnosticsRecord(
                t=float(s),
                E_H=E_H,
                E_R=E_R,
                E_total=E_total,
                tau_l2=float(suite.tau_l2[j]),
                tau_sup=0.0,
                rho_l2=math.sqrt(max(ops._integrate(np.sum(rho * rho, axis=0), g), 0.0)),
                slacks={"eh_dev": E_H - float(suite.E_H[0]), "map_distance": d_from_u},
            )
        )
    h2 = g.h * g.h
    verdicts = [
        Verdict("homotopy_energy_flat", suite.max_eh_dev <= c_dev * h2,
                c_dev * h2 - suite.max_eh_dev, c_dev * h2),
        Verdict("homotopy_tension", suite.max_tau <= 10.0 * tau_tol,
                10.0 * tau_tol - suite.max_tau, 10.0 * tau_tol),
        Verdict("homotopy_winding", suite.winding_constant,
                0.0 if suite.winding_constant else -1.0, 0.0),
    ]
    summary = {
        "max_eh_dev": suite.max_eh_dev,
        "max_tau": suite.max_tau,
        "endpoint_distance": suite.endpoint_distance,
        "s_count": s_count,
    }
    return ScenarioResult(records, ["eh_dev", "map_distance"], summary, verdicts,
                          [("endpoint_u.bin", u, 0.0), ("endpoint_v.bin", v, 0.0)])


def _scn_kernel(cfg):
    sec = cfg.section("kernel")
    g = Grid(cfg.grid_n)
    t_min = float(sec.get("t_min", 4.0 * g.h * g.h))
    t_max_s = float(sec.get("t_max", 0.05))
    samples = int(sec.get("samples", 9))
    if not 0.0 < t_min < t_max_s:
        raise ConfigError("kernel probe needs 0 < kernel.t_min < kernel.t_max")
    dt = None if cfg.dt == "auto" else float(cfg.dt)
    report = heat_kernel_probe(
        t_range=np.geomspace(t_min, t_max_s, samples), grid_n=cfg.grid_n, dt=dt
    )
    records = []
    for i, t in enumerate(report.times):
        records.append(
            DiagnosticsRecord(
                t=float(t),
                E_H=float(report.e_h[i]),
                E_R=float(report.e_r[i]),
                E_total=float(report.e_h[i] + report.e_r[i]),
                tau_l2=float(report.lap_l2[i]),
                tau_sup=float(report.lap_sup[i]),
                rho_l2=0.0,
                slacks={
                    "sup_u": float(report.sup[i]),
                    "min_u": float(report.min[i]),
                    "mass_dev": float(report.mass[i] - 1.0),
                },
            )
        )
    verdicts = [
        Verdict("kernel_exponent", abs(report.exponent + 2.0) <= 0.3,
                0.3 - abs(report.exponent + 2.0), 0.3),
        Verdict("kernel_positivity", report.positivity_floor >= -1e-12,
                report.positivity_floor + 1e-12, 1e-12),
        Verdict("kernel_smoothing", report.nonmono_fraction == 0.0,
                -report.nonmono_fraction, 0.0),
        Verdict("kernel_mass", report.mass_drift <= 1e-12,
                1e-12 - report.mass_drift, 1e-12),
    ]
    summary = {
        "exponent": report.exponent,
        "mass_drift": report.mass_drift,
        "positivity_floor": report.positivity_floor,
        "nonmono_fraction": report.nonmono_fraction,
        "times": report.times.tolist(),
        "sup_u": report.sup.tolist(),
    }
    return ScenarioResult(records, ["sup_u", "min_u", "mass_dev"], summary, verdicts, [])


def _scn_cc_ball(cfg):
    sec = cfg.section("cc_ball")
    g = Grid(cfg.grid_n)
    delta_max = float(sec.get("delta_max", 0.25))
    delta_min = float(sec.get("delta_min", min(4.0 * g.h, 0.25 * delta_max)))
    count = int(sec.get("count", 5))
    samples = int(sec.get("samples", 2_000_000))
    center = _parse_tuple(sec.get("center", "0.3,0.4,0.2"), 3, float, "cc_ball.center")
    if not 0.0 < delta_min < delta_max < 0.5:
        raise ConfigError("cc_ball needs 0 < delta_min < delta_max < 0.5")
    deltas = np.geomspace(delta_min, delta_max, count)
    volumes = [cc_ball_volume(center, float(d), samples=samples, seed=cfg.seed) for d in deltas]
    exponent = fit_loglog(deltas, volumes)
    records = []
    for d, vol in zip(deltas, volumes):
        records.append(
            DiagnosticsRecord(
                t=float(d), E_H=0.0, E_R=0.0, E_total=0.0,
                tau_l2=0.0, tau_sup=0.0, rho_l2=0.0,
                slacks={"delta": float(d), "ball_volume": float(vol)},
            )
        )
    verdict = Verdict("cc_exponent", abs(exponent - 4.0) <= 0.4,
                      0.4 - abs(exponent - 4.0), 0.4)
    summary = {
        "exponent": exponent,
        "deltas": [float(d) for d in deltas],
        "volumes": [float(v) for v in volumes],
        "samples": samples,
    }
    return ScenarioResult(records, ["delta", "ball_volume"], summary, [verdict], [])


def _scn_distance(cfg):
    g = Grid(cfg.grid_n)
    target = cfg.make_target()
    sec = cfg.section("distance")
    steps = int(sec.get("steps", 400))
    c_dist = float(sec.get("c_dist", 1.0))
    seed2 = int(sec.get("seed2", cfg.seed + 1))
    winding = _parse_tuple(sec.get("winding", "1,0,0,1"), 4, int, "distance.winding")
    amplitude = float(sec.get("amplitude", 0.3))
    z_amp = float(sec.get("z_amp", 0.6))
    dt = cfg.resolve_dt(g.h)
    advance = flow.step_explicit if cfg.integrator == "explicit" else flow.step_imex

    def make_state(seed):
        u = flow.initial_map(g, target, mode=cfg.mode, seed=seed, winding=winding,
                             amplitude=amplitude, z_amp=z_amp)
        return FlowState(u=u, target=target, mode=cfg.mode)

    su = make_state(cfg.seed)
    sv = make_state(seed2)
    records = []
    prev = None
    prev_d = None
    slack_min = math.inf
    for step in range(steps + 1):
        if step % cfg.record_every == 0 or step == steps:
            d = map_distance(su.u, sv.u, target)
            rec = flow.make_record(su, prev)
            rec.slacks = {"map_distance": d,
                          "dist_slack": 0.0 if prev_d is None else prev_d - d}
            if prev_d is not None:
                slack_min = min(slack_min, prev_d - d)
            records.append(rec)
            prev = rec
            prev_d = d
        if step < steps:
            try:
                su = advance(su, dt)
                sv = advance(sv, dt)
            except RUNTIME_ERRORS as exc:
                raise FlowAbort(exc, su, records) from exc
    tol = c_dist * (g.h * g.h + dt)
    if not math.isfinite(slack_min):
        slack_min = 0.0
    verdict = Verdict("distance_nonincreasing", slack_min >= -tol, slack_min + tol, tol)
    summary = {
        "d_initial": records[0].slacks["map_distance"],
        "d_final": records[-1].slacks["map_distance"],
        "dist_slack_min": slack_min,
        "steps": steps,
        "dt": dt,
    }
    return ScenarioResult(records, ["map_distance", "dist_slack"], summary, [verdict],
                          [("final_u.bin", su.u, su.t), ("final_v.bin", sv.u, sv.t)])


_SCENARIO_FUNCS = {
    "heat": _scn_heat,
    "flow": _scn_flow,
    "picard": _scn_picard,
    "homotopy": _scn_homotopy,
    "kernel_probe": _scn_kernel,
    "cc_ball": _scn_cc_ball,
    "distance_monotone": _scn_distance,
}


def _write_records(path, records, extras):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(FIXED_COLUMNS) + list(extras))
        for r in records:
            row = [r.t, r.E_H, r.E_R, r.E_total, r.tau_l2, r.tau_sup, r.rho_l2]
            row += [r.slacks.get(name, 0.0) for name in extras]
            writer.writerow(["%.17g" % v for v in row])


def _sanitize(obj):
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [_sanitize(v) for v in obj.tolist()]
    return obj


def _hash_files(*paths):
    digest = hashlib.sha256()
    for path in paths:
        with open(path, "rb") as fh:
            digest.update(fh.read())
    return digest.hexdigest()


def run(config):
    """Execute one scenario and write its artifacts; returns the exit code."""
    out = config.out_dir
    os.makedirs(out, exist_ok=True)
    abort = None
    try:
        result = _SCENARIO_FUNCS[config.scenario](config)
    except FlowAbort as exc:
        abort = str(exc)
        extras = list(exc.records[0].slacks) if exc.records else []
        result = ScenarioResult(exc.records, extras, {}, [], [])
    except RUNTIME_ERRORS as exc:
        abort = f"{type(exc).__name__}: {exc}"
        result = ScenarioResult([], [], {}, [], [])

    records_path = os.path.join(out, "records.csv")
    _write_records(records_path, result.records, result.extra_columns)
    summary = dict(result.summary)
    summary["scenario"] = config.scenario
    summary["grid_n"] = config.grid_n
    summary["seed"] = config.seed
    if abort is not None:
        summary["abort"] = abort
    summary["verdicts"] = {v.name: v.as_dict() for v in result.verdicts}
    summary["all_passed"] = bool(
        abort is None and all(v.passed for v in result.verdicts)
    )
    summary_path = os.path.join(out, "summary.json")
    with open(summary_path, "w") as fh:
        json.dump(_sanitize(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")

    if result.snapshots:
        snap_dir = os.path.join(out, "snapshots")
        os.makedirs(snap_dir, exist_ok=True)
        for name, m, tval in result.snapshots:
            write_snapshot(m, os.path.join(snap_dir, name), time=tval,
                           scenario=config.scenario, seed=config.seed)

    if result.records:
        plots_dir = os.path.join(out, "plots")
        plots.emit_plots(records_path, plots_dir)
        plots.render_plots(records_path, plots_dir)

    manifest = {
        "config": _sanitize(config.flat),
        "content_hash": _hash_files(records_path, summary_path),
        "versions": {
            "subrh": __version__,
            "numpy": np.__version__,
            "matplotlib": matplotlib.__version__,
            "python": platform.python_version(),
        },
    }
    with open(os.path.join(out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")

    if abort is not None:
        return 1
    return 0 if summary["all_passed"] else 1


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="subrh",
        description="Pseudo-harmonic map flow simulator on the Heisenberg nilmanifold",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run a scenario from a config file")
    p_run.add_argument("--config", required=True, help="key=value config file")
    p_run.add_argument("--out", help="output directory (overrides out_dir)")
    p_run.add_argument("--seed", type=int, help="RNG seed (overrides seed)")
    p_run.add_argument("--grid", type=int, help="grid size N (overrides grid_n)")
    p_run.add_argument("--scenario", help="scenario name (overrides scenario)")
    p_plots = sub.add_parser("plots", help="emit plot scripts and render PNGs")
    p_plots.add_argument("records", help="path to a records.csv")
    p_plots.add_argument("--out", help="output directory (default: sibling plots/)")
    args = parser.parse_args(argv)

    if args.command == "plots":
        out = args.out or os.path.join(
            os.path.dirname(os.path.abspath(args.records)), "plots"
        )
        try:
            written = plots.emit_plots(args.records, out)
            written += plots.render_plots(args.records, out)
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        for path in written:
            print(path)
        return 0

    try:
        flat = parse_config(args.config)
        if args.out is not None:
            flat["out_dir"] = args.out
        if args.seed is not None:
            flat["seed"] = args.seed
        if args.grid is not None:
            flat["grid_n"] = args.grid
        if args.scenario is not None:
            flat["scenario"] = args.scenario
        cfg = RunConfig.from_flat(flat)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
