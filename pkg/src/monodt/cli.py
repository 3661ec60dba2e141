"""Command-line front end.

Subcommands: simulate, stability, critical-dt, converge, bench, dump-model,
dump-stimulus.  Each takes an optional config file (INI-style sections of
key = value pairs) plus --set section.key=value overrides, writes its data
products as CSV/JSON into the output directory, and always writes a
manifest.json recording the config hash, parameter provenance, outcome and
content hashes of every output file.

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure (the
manifest is still written).  Numeric CSV output uses 17 significant digits
so independent implementations can be diffed at full double precision.
CSV column orders are documented in csv_schema.md at the repository root.
"""

from __future__ import annotations

import argparse
import concurrent.futures as cf
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bench import (compute_reference, convergence_study, cpu_benchmark,
                    find_dt_for_error, time_scheme)
from .config import RunConfig, fmt17, parse_config
from .errors import BracketError, ConfigError, MonodtError, TargetUnreachable
from .stability import (StabilityPredicate, diffusion_symbol, empirical_dt,
                        rk4_stability_bound, sbdf2_boundary_locus, scan_lambda_min,
                        strang_rk_contour, sweep_omega, theoretical_dt)
from .steppers import SCHEMES, run_simulation

RL_SCHEMES = ("rl_fbe", "rl_cnab")


def _n_workers(n_jobs: int) -> int:
    cap = os.environ.get("MONODT_THREADS")
    try:
        cap = int(cap) if cap else 1
    except ValueError:
        cap = 1
    return max(1, min(cap, n_jobs))


def _write_csv(path: Path, header: list[str], rows: list[tuple]) -> None:
    with open(path, "w") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(fmt17(v) if isinstance(v, float) else str(v)
                             for v in row) + "\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Reporter:
    """Collects output files and writes the run manifest."""

    def __init__(self, cfg: RunConfig, command: str, out_dir: Path):
        self.cfg = cfg
        self.command = command
        self.out_dir = out_dir
        self.outputs: list[Path] = []
        self.t0 = time.perf_counter()
        out_dir.mkdir(parents=True, exist_ok=True)

    def csv(self, name: str, header: list[str], rows: list[tuple]) -> Path:
        path = self.out_dir / name
        _write_csv(path, header, rows)
        self.outputs.append(path)
        return path

    def json(self, name: str, payload: dict) -> Path:
        path = self.out_dir / name
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        self.outputs.append(path)
        return path

    def text(self, name: str, content: str) -> Path:
        path = self.out_dir / name
        path.write_text(content)
        self.outputs.append(path)
        return path

    def manifest(self, outcome: str, extra: dict | None = None) -> Path:
        model = self.cfg.model()
        payload = {
            "command": self.command,
            "config_hash": self.cfg.content_hash(),
            "version": __version__,
            "model": model.name,
            "model_parameters": {k: fmt17(v) for k, v in sorted(model.params.items())},
            "provenance": self.cfg.provenance,
            "outcome": outcome,
            "wall_time_s": time.perf_counter() - self.t0,
            "outputs": [{"path": p.name, "sha256": _sha256(p)} for p in self.outputs],
        }
        if extra:
            payload.update(extra)
        path = self.out_dir / "manifest.json"
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        return path


def _state_rows(state, model, grid):
    names = ["x", "u"] + list(model.gate_names) + list(model.conc_names)
    rows = []
    for jx, xv in enumerate(grid.x):
        rows.append((float(xv), float(state.u[jx]),
                     *map(float, state.v[jx]), *map(float, state.x[jx])))
    return names, rows


def cmd_simulate(cfg: RunConfig, rep: Reporter) -> int:
    problem = cfg.problem()
    grid = cfg.grid()
    probe = cfg.probe()
    n1, n2 = probe.nodes(grid)
    stride = cfg["run.sample_stride"] or None
    res = run_simulation(problem, cfg["run.scheme"], cfg["run.dt"],
                         cfg["run.final_time"], probe_nodes=(n1, n2),
                         crossing_threshold=probe.threshold, keep_trace=False,
                         snapshot_times=tuple(cfg["run.snapshot_times"]),
                         sample_stride=stride)
    for snap in res.snapshots:
        names, rows = _state_rows(snap, problem.model, grid)
        rep.csv(f"snapshot_t{fmt17(snap.t)}.csv", names, rows)
    extra = {
        "scheme": cfg["run.scheme"], "dt": fmt17(cfg["run.dt"]),
        "n_steps": res.n_steps, "cpu_total_s": res.wall_time,
        "cpu_per_step_s": res.cpu_per_step,
        "depolarization_times": [None if t is None else fmt17(t)
                                 for t in (res.crossing_times or ())],
    }
    if res.status != "completed":
        rep.manifest(f"blow-up at t={fmt17(res.blowup_time)}", extra)
        print(f"simulate: blow-up at t={fmt17(res.blowup_time)}", file=sys.stderr)
        return 3
    names, rows = _state_rows(res.final, problem.model, grid)
    rep.csv("final_state.csv", names, rows)
    rep.manifest("completed", extra)
    return 0


def _stability_scans(cfg: RunConfig):
    problem = cfg.problem()
    grid = cfg.grid()
    dt = cfg["stability.scan_dt"] or cfg["run.dt"]
    T = cfg["stability.scan_final_time"] or cfg["run.final_time"]
    res = run_simulation(problem, cfg["stability.scan_scheme"], dt, T,
                         sample_stride=cfg["stability.sample_stride"])
    if res.status != "completed":
        raise MonodtError(f"stability reference run blew up at t={res.blowup_time}")
    samples = res.samples
    scan_j = scan_lambda_min(problem.model, samples)
    omega = diffusion_symbol(problem.sigma, grid.h, np.pi / grid.h)
    scan_jd = scan_lambda_min(problem.model, samples, omega_entry=omega)
    scan_rl = scan_lambda_min(problem.model, samples, matrix="J_RL")
    theo = {}
    for scheme in SCHEMES:
        theo[scheme] = theoretical_dt(scheme,
                                      lambda_min_j=scan_j.lambda_min,
                                      lambda_min_j_diff=scan_jd.lambda_min,
                                      lambda_min_j_rl=scan_rl.lambda_min)
    return problem, samples, scan_j, scan_jd, scan_rl, theo


def cmd_stability(cfg: RunConfig, rep: Reporter) -> int:
    problem, samples, scan_j, scan_jd, scan_rl, theo = _stability_scans(cfg)
    grid = cfg.grid()
    report = {
        "model": problem.model.name,
        "h": grid.h,
        "sigma": problem.sigma,
        "lambda_min_j": scan_j.lambda_min,
        "lambda_min_j_argmin": {"node": scan_j.node, "time": scan_j.time},
        "lambda_min_j_diffusion": scan_jd.lambda_min,
        "lambda_min_j_rl": scan_rl.lambda_min,
        "rk4_real_axis_bound": rk4_stability_bound(),
        "theoretical_dt": {k: fmt17(v) for k, v in theo.items()},
        "dc3_note": "no closed-form condition; forward-backward Euler value reported",
        "scan_states": scan_j.n_states,
    }
    rep.json("stability.json", report)
    thetas = np.linspace(0.0, 2.0 * np.pi, 257)
    locus = sbdf2_boundary_locus(thetas)
    c2 = strang_rk_contour(np.linspace(0.5 * np.pi, 1.5 * np.pi, 129), 2)
    c4 = strang_rk_contour(np.linspace(0.5 * np.pi, 1.5 * np.pi, 129), 4)
    rows = []
    for i, th in enumerate(thetas):
        half = i // 2
        rows.append((float(th), float(locus[i].real), float(locus[i].imag),
                     float(c2[min(half, 128)].real), float(c2[min(half, 128)].imag),
                     float(c4[min(half, 128)].real), float(c4[min(half, 128)].imag)))
    rep.csv("stability_contours.csv",
            ["theta", "sbdf2_re", "sbdf2_im", "rk2_re", "rk2_im", "rk4_re", "rk4_im"],
            rows)
    if cfg["stability.sweep_omega"]:
        sw = sweep_omega(problem.model, scan_j.state, problem.sigma, grid.h)
        rep.csv("omega_sweep.csv", ["omega", "lambda_min"],
                [(float(a), float(b)) for a, b in sw])
    rep.manifest("completed")
    return 0


def cmd_critical_dt(cfg: RunConfig, rep: Reporter) -> int:
    problem, samples, scan_j, scan_jd, scan_rl, theo = _stability_scans(cfg)
    grid = cfg.grid()
    probe = cfg.probe()
    n1, n2 = probe.nodes(grid)
    T = cfg["critical_dt.final_time"] or cfg["run.final_time"]
    schemes = cfg["critical_dt.schemes"]

    ref_speed = None
    if any(s in RL_SCHEMES for s in schemes):
        dt_ref = cfg["critical_dt.reference_speed_dt"] or 0.2 * theo["fbe"]
        ref = run_simulation(problem, "fbe", dt_ref, T, probe_nodes=(n1, n2),
                             crossing_threshold=probe.threshold, keep_trace=False)
        t1, t2 = ref.crossing_times
        if t1 is not None and t2 is not None and t2 > t1:
            ref_speed = (grid.x[n2] - grid.x[n1]) / (t2 - t1)

    lo_f = cfg["critical_dt.bracket_lo_factor"]
    hi_f = cfg["critical_dt.bracket_hi_factor"]
    sig = cfg["critical_dt.sig_figs"]

    def job(scheme):
        if scheme in RL_SCHEMES:
            pred = StabilityPredicate(problem, T, probe_nodes=(n1, n2),
                                      threshold=probe.threshold,
                                      reference_speed=ref_speed)
        else:
            pred = StabilityPredicate(problem, T)
        try:
            dt_star, resolution = empirical_dt(scheme, pred,
                                               (lo_f * theo[scheme], hi_f * theo[scheme]),
                                               sig_figs=sig)
            return scheme, {"dt_star": dt_star, "resolution": resolution,
                            "dt_theo": theo[scheme],
                            "ratio_to_theory": dt_star / theo[scheme]}
        except BracketError as exc:
            return scheme, {"error": str(exc), "dt_theo": theo[scheme]}

    results = {}
    with cf.ThreadPoolExecutor(max_workers=_n_workers(len(schemes))) as pool:
        for scheme, payload in pool.map(job, schemes):
            results[scheme] = payload
    rep.json("critical_dt.json", {
        "model": problem.model.name, "h": grid.h, "final_time": T,
        "lambda_min_j": scan_j.lambda_min,
        "lambda_min_j_diffusion": scan_jd.lambda_min,
        "lambda_min_j_rl": scan_rl.lambda_min,
        "schemes": results,
    })
    rep.manifest("completed")
    return 0


def cmd_converge(cfg: RunConfig, rep: Reporter) -> int:
    problem = cfg.problem()
    probe = cfg.probe()
    T = cfg["run.final_time"]
    dts = list(cfg["converge.dts"])
    if not dts:
        raise ConfigError("converge.dts", "give at least two time-steps")
    ref_dt = cfg["converge.reference_dt"]
    if not ref_dt:
        ref_dt = min(dts) / cfg["converge.min_ref_ratio"]
    reference = compute_reference(problem, cfg["converge.reference_scheme"],
                                  ref_dt, T, probe, cache=cfg["converge.cache"])
    summary = {}
    for scheme in cfg["converge.schemes"]:
        series = convergence_study(problem, scheme, dts, reference, probe,
                                   min_ratio=cfg["converge.min_ref_ratio"])
        rows = [(r.dt, r.e_l2, r.e_h1, r.e_speed, r.e_t1, r.cpu_total,
                 r.cpu_per_step, r.status) for r in series.rows]
        rep.csv(f"converge_{scheme}.csv",
                ["dt", "e_l2", "e_h1", "e_speed", "e_t1", "cpu_total",
                 "cpu_per_step", "status"], rows)
        summary[scheme] = {
            "rates": {k: [fmt17(r) if np.isfinite(r) else None for r in v]
                      for k, v in series.rates.items()},
            "window": list(series.window),
            "window_rate_l2": fmt17(series.window_rate_l2)
            if np.isfinite(series.window_rate_l2) else None,
        }
    rep.json("converge.json", {
        "model": problem.model.name, "final_time": T,
        "reference": {"scheme": reference.scheme, "dt": fmt17(reference.dt),
                      "l2_norm": fmt17(reference.l2_norm),
                      "h1_norm": fmt17(reference.h1_norm),
                      "speed": fmt17(reference.speed), "t1": fmt17(reference.t1)},
        "schemes": summary,
    })
    rep.manifest("completed")
    return 0


def cmd_bench(cfg: RunConfig, rep: Reporter) -> int:
    problem = cfg.problem()
    probe = cfg.probe()
    T = cfg["run.final_time"]
    _, _, scan_j, scan_jd, scan_rl, theo = _stability_scans(cfg)
    ref_dt = cfg["converge.reference_dt"]
    if not ref_dt:
        raise ConfigError("converge.reference_dt", "bench requires an explicit reference step")
    reference = compute_reference(problem, cfg["converge.reference_scheme"],
                                  ref_dt, T, probe, cache=cfg["converge.cache"])
    schemes = cfg["bench.schemes"]
    hints = {s: cfg["bench.dt_hint_factor"] * theo[s] for s in schemes}
    caps = {s: 0.95 * theo[s] for s in schemes if s not in RL_SCHEMES}
    rows = []
    failures = {}
    for scheme in schemes:
        try:
            dt, e, eh1 = find_dt_for_error(problem, scheme,
                                           cfg["bench.target_rel_l2"] * reference.l2_norm,
                                           reference, hints[scheme],
                                           dt_max=caps.get(scheme))
            res = time_scheme(problem, scheme, dt, T, cfg["bench.repetitions"])
            rows.append((scheme, e, eh1, dt, res.wall_time, res.cpu_per_step,
                         res.n_steps))
        except TargetUnreachable as exc:
            failures[scheme] = {"error": str(exc),
                                "error_at_limit": exc.error_at_limit}
    rep.csv("bench.csv",
            ["scheme", "e_l2", "e_h1", "dt", "cpu_total", "cpu_per_step", "n_steps"],
            rows)
    rep.json("bench.json", {
        "model": problem.model.name,
        "target_rel_l2": cfg["bench.target_rel_l2"],
        "reference_l2_norm": fmt17(reference.l2_norm),
        "rows": [dict(zip(("scheme", "e_l2", "e_h1", "dt", "cpu_total",
                           "cpu_per_step", "n_steps"), r)) for r in rows],
        "unreachable": failures,
    })
    rep.manifest("completed")
    return 0


def cmd_dump_model(cfg: RunConfig, rep: Reporter) -> int:
    model = cfg.model()
    lines = [f"model = {model.name}",
             f"gating_variables = {model.p}",
             f"concentrations = {model.q}",
             f"membrane_capacity = {fmt17(model.membrane_capacity)}"]
    for key, val in sorted(model.params.items()):
        lines.append(f"param.{key} = {fmt17(val)}")
    rest = model.rest_state.pack()
    for name, val in zip(model.var_names, rest):
        lines.append(f"rest.{name} = {fmt17(val)}")
    rep.text("model.txt", "\n".join(lines) + "\n")
    rep.manifest("completed")
    return 0


def cmd_dump_stimulus(cfg: RunConfig, rep: Reporter) -> int:
    problem = cfg.problem()
    grid = cfg.grid()
    stim = problem.stimulus
    times = np.linspace(stim.t_start, stim.t_end, 41)
    profile = stim.space_profile(grid.x)
    rows = []
    for t in times:
        ft = stim.time_factor(float(t))
        for jx, xv in enumerate(grid.x):
            val = profile[jx] * ft
            if val != 0.0 or stim.x_start <= xv <= stim.x_end:
                rows.append((float(t), float(xv), float(val)))
    rep.csv("stimulus.csv", ["t", "x", "i_app"], rows)
    rep.manifest("completed")
    return 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "stability": cmd_stability,
    "critical-dt": cmd_critical_dt,
    "converge": cmd_converge,
    "bench": cmd_bench,
    "dump-model": cmd_dump_model,
    "dump-stimulus": cmd_dump_stimulus,
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="monodt",
        description="Time-stepping lab for the 1D monodomain cardiac model")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", nargs="?", default=None,
                       help="configuration file (INI sections of key = value)")
        p.add_argument("--set", action="append", default=[], dest="overrides",
                       metavar="SECTION.KEY=VALUE")
        p.add_argument("--out", default=None, help="output directory override")
    args = parser.parse_args(argv)

    try:
        text = Path(args.config).read_text() if args.config else ""
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        cfg = parse_config(text, overrides=args.overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    out_dir = Path(args.out) if args.out else Path(cfg["run.output_dir"])
    rep = Reporter(cfg, args.command, out_dir)
    try:
        return _COMMANDS[args.command](cfg, rep)
    except ConfigError as exc:
        rep.manifest(f"config error: {exc}")
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except MonodtError as exc:
        rep.manifest(f"numerical failure: {exc}")
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
