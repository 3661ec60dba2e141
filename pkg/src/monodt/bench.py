"""Error metrics, reference solutions, convergence studies and the
CPU-cost-per-accuracy benchmark.

Errors compare a run against a reference computed on the same spatial grid
with a much smaller time-step, so only the temporal error is measured.  Four
metrics are tracked: Simpson-rule L2 norm and H1 seminorm of the potential
difference at the final time, and the errors of two derived quantities, the
depolarization time at a probe node and the wave speed between two probes.
"""

from __future__ import annotations

import hashlib
import json
import os
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DegenerateProbe, DimensionError, TargetUnreachable, WaveNotArrived
from .grid import Grid1D
from .steppers import NOMINAL_ORDER, Problem, RunResult, run_simulation


# ---------------------------------------------------------------------------
# norms and probe metrics
# ---------------------------------------------------------------------------


def simpson_weights(n_nodes: int, h: float) -> np.ndarray:
    if n_nodes < 3 or n_nodes % 2 == 0:
        raise DimensionError("Simpson's rule needs an even number of intervals")
    w = np.full(n_nodes, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return w * (h / 3.0)


def _derivative(d: np.ndarray, h: float) -> np.ndarray:
    """Second-order first derivative: centered inside, one-sided at the ends."""
    out = np.empty_like(d)
    out[1:-1] = (d[2:] - d[:-2]) / (2.0 * h)
    out[0] = (-3.0 * d[0] + 4.0 * d[1] - d[2]) / (2.0 * h)
    out[-1] = (3.0 * d[-1] - 4.0 * d[-2] + d[-3]) / (2.0 * h)
    return out


def norms(u: np.ndarray, grid: Grid1D) -> tuple[float, float]:
    """(L2 norm, H1 seminorm) of a nodal function by Simpson quadrature."""
    if u.shape[0] != grid.n_nodes:
        raise DimensionError("vector does not match grid")
    w = simpson_weights(grid.n_nodes, grid.h)
    l2 = float(np.sqrt(np.sum(w * u * u)))
    du = _derivative(u, grid.h)
    h1 = float(np.sqrt(np.sum(w * du * du)))
    return l2, h1


def error_norms(u_test: np.ndarray, u_ref: np.ndarray, grid: Grid1D) -> tuple[float, float]:
    """(e_L2, e_H1) of the difference between two nodal potentials."""
    if u_test.shape != u_ref.shape:
        raise DimensionError("grids of the two solutions differ")
    return norms(u_test - u_ref, grid)


def depolarization_time(times: np.ndarray, u_trace: np.ndarray, threshold: float) -> float:
    """First upward threshold crossing, linearly interpolated.

    Raises WaveNotArrived if the trace never reaches the threshold.
    """
    above = u_trace >= threshold
    if above[0]:
        return float(times[0])
    idx = np.flatnonzero(above[1:] & ~above[:-1])
    if idx.size == 0:
        raise WaveNotArrived(f"trace never reached {threshold}")
    k = int(idx[0])
    u0, u1 = u_trace[k], u_trace[k + 1]
    return float(times[k] + (times[k + 1] - times[k]) * (threshold - u0) / (u1 - u0))


def wave_speed(t1: float, t2: float, x1: float, x2: float) -> float:
    """Front speed between two probes: (x2 - x1)/(T2 - T1)."""
    if t2 <= t1:
        raise DegenerateProbe(f"T2={t2} does not exceed T1={t1}")
    return (x2 - x1) / (t2 - t1)


def convergence_rate(e1: float, e2: float, dt1: float, dt2: float) -> float:
    """Observed order between two rows: log(e1/e2)/log(dt1/dt2)."""
    return float(np.log(abs(e1 / e2)) / np.log(dt1 / dt2))


def select_window(rates: list[float], spread: float = 0.3) -> tuple[int, int]:
    """Longest run of adjacent rate estimates varying by less than ``spread``.

    Returns (start, stop) indices into ``rates`` (stop exclusive); ties go to
    the latest (smallest time-step) window, where the asymptotic regime
    lives.
    """
    finite = [i for i, r in enumerate(rates) if np.isfinite(r)]
    if not finite:
        return (0, 0)
    best = (0, 0)
    for i in range(len(rates)):
        if not np.isfinite(rates[i]):
            continue
        lo = hi = rates[i]
        j = i
        while j + 1 < len(rates) and np.isfinite(rates[j + 1]):
            lo2, hi2 = min(lo, rates[j + 1]), max(hi, rates[j + 1])
            if hi2 - lo2 >= spread:
                break
            lo, hi = lo2, hi2
            j += 1
        if (j + 1 - i) >= (best[1] - best[0]):
            best = (i, j + 1)
    return best


# ---------------------------------------------------------------------------
# probe spec and reference solutions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProbeSpec:
    """Threshold and the two probe coordinates for T1/T2/speed."""

    threshold: float
    x1: float
    x2: float

    def nodes(self, grid: Grid1D) -> tuple[int, int]:
        n1, n2 = grid.node_at(self.x1), grid.node_at(self.x2)
        if not n1 < n2:
            raise ConfigError("probe.x2", "must lie beyond probe.x1")
        return n1, n2


@dataclass
class ReferenceSolution:
    """Fine-step solution used as the truth for the error metrics."""

    model: str
    scheme: str
    dt: float
    T: float
    u_final: np.ndarray
    l2_norm: float
    h1_norm: float
    t1: float
    t2: float
    speed: float
    wall_time: float = 0.0

    def check_ratio(self, dt_compared: float, min_ratio: float = 64.0):
        if dt_compared / self.dt < min_ratio - 1e-9:
            raise ConfigError(
                "reference.dt",
                f"reference step {self.dt} is only {dt_compared / self.dt:.1f}x "
                f"below the smallest compared step; needs {min_ratio}x")


def _cache_dir() -> Path | None:
    path = os.environ.get("MONODT_CACHE_DIR")
    return Path(path) if path else None


def reference_key(problem: Problem, scheme: str, dt: float, T: float,
                  probe: ProbeSpec) -> str:
    ident = {
        "model": problem.model.name,
        "params": sorted(problem.model.params.items()),
        "rest": list(problem.model.rest_state.pack()),
        "grid": [problem.grid.length, problem.grid.intervals],
        "sigma": problem.sigma,
        "stim": [problem.stimulus.amplitude, problem.stimulus.x_start,
                 problem.stimulus.x_end, problem.stimulus.t_start,
                 problem.stimulus.t_end],
        "scheme": scheme, "dt": dt, "T": T,
        "probe": [probe.threshold, probe.x1, probe.x2],
    }
    blob = json.dumps(ident, sort_keys=True, default=float).encode()
    return hashlib.sha256(blob).hexdigest()[:24]


def compute_reference(problem: Problem, scheme: str, dt: float, T: float,
                      probe: ProbeSpec, cache: bool = True) -> ReferenceSolution:
    """Run (or load from the cache directory) a reference solution."""
    key = reference_key(problem, scheme, dt, T, probe)
    cdir = _cache_dir() if cache else None
    if cdir is not None:
        f = cdir / f"ref_{key}.npz"
        if f.exists():
            data = np.load(f)
            return ReferenceSolution(
                model=problem.model.name, scheme=scheme, dt=dt, T=T,
                u_final=data["u_final"], l2_norm=float(data["l2"]),
                h1_norm=float(data["h1"]), t1=float(data["t1"]),
                t2=float(data["t2"]), speed=float(data["speed"]),
                wall_time=float(data["wall"]))
    n1, n2 = probe.nodes(problem.grid)
    res = run_simulation(problem, scheme, dt, T, probe_nodes=(n1, n2),
                         crossing_threshold=probe.threshold, keep_trace=False,
                         check_every=1000)
    if res.status != "completed":
        raise ConfigError("reference.dt", f"reference run blew up at t={res.blowup_time}")
    t1, t2 = res.crossing_times
    if t1 is None or t2 is None:
        raise WaveNotArrived("reference run: wave did not reach both probes")
    x = problem.grid.x
    c = wave_speed(t1, t2, x[n1], x[n2])
    l2, h1 = norms(res.final.u, problem.grid)
    ref = ReferenceSolution(model=problem.model.name, scheme=scheme, dt=dt, T=T,
                            u_final=res.final.u, l2_norm=l2, h1_norm=h1,
                            t1=t1, t2=t2, speed=c, wall_time=res.wall_time)
    if cdir is not None:
        cdir.mkdir(parents=True, exist_ok=True)
        np.savez_compressed(cdir / f"ref_{key}.npz", u_final=ref.u_final,
                            l2=l2, h1=h1, t1=t1, t2=t2, speed=c,
                            wall=res.wall_time)
    return ref


# ---------------------------------------------------------------------------
# convergence study
# ---------------------------------------------------------------------------


@dataclass
class ConvergenceRow:
    dt: float
    e_l2: float
    e_h1: float
    e_speed: float
    e_t1: float
    cpu_total: float
    cpu_per_step: float
    status: str = "completed"


@dataclass
class ConvergenceSeries:
    scheme: str
    model: str
    rows: list[ConvergenceRow]
    rates: dict[str, list[float]] = field(default_factory=dict)
    window: tuple[int, int] = (0, 0)
    window_rate_l2: float = float("nan")

    def completed_rows(self) -> list[ConvergenceRow]:
        return [r for r in self.rows if r.status == "completed"]


# errors below this are treated as round-off floor and excluded from rates
RATE_FLOOR = 1e-13


def convergence_study(problem: Problem, scheme: str, dts: list[float],
                      reference: ReferenceSolution, probe: ProbeSpec,
                      min_ratio: float = 64.0) -> ConvergenceSeries:
    """Errors and observed orders for a decreasing list of time-steps."""
    dts = sorted(dts, reverse=True)
    smallest = min(dts)
    reference.check_ratio(smallest, min_ratio)
    n1, n2 = probe.nodes(problem.grid)
    x = problem.grid.x
    rows = []
    for dt in dts:
        n = round(reference.T / dt)
        if abs(n * dt - reference.T) > 1e-9 * reference.T:
            raise ConfigError("converge.dts", f"dt={dt} does not divide T={reference.T}")
        res = run_simulation(problem, scheme, dt, reference.T,
                             probe_nodes=(n1, n2),
                             crossing_threshold=probe.threshold, keep_trace=False)
        if res.status != "completed":
            rows.append(ConvergenceRow(dt, np.nan, np.nan, np.nan, np.nan,
                                       res.wall_time, res.cpu_per_step, "blowup"))
            continue
        el2, eh1 = error_norms(res.final.u, reference.u_final, problem.grid)
        t1, t2 = res.crossing_times
        if t1 is None or t2 is None:
            ec = np.nan
            et1 = np.nan if t1 is None else abs(t1 - reference.t1)
        else:
            c = wave_speed(t1, t2, x[n1], x[n2])
            ec = abs(c - reference.speed)
            et1 = abs(t1 - reference.t1)
        rows.append(ConvergenceRow(dt, el2, eh1, ec, et1,
                                   res.wall_time, res.cpu_per_step))
    series = ConvergenceSeries(scheme=scheme, model=problem.model.name, rows=rows)
    for metric in ("e_l2", "e_h1", "e_speed", "e_t1"):
        rates = []
        for a, b in zip(rows[:-1], rows[1:]):
            ea, eb = getattr(a, metric), getattr(b, metric)
            if (a.status != "completed" or b.status != "completed"
                    or not np.isfinite(ea) or not np.isfinite(eb)
                    or min(abs(ea), abs(eb)) < RATE_FLOOR):
                rates.append(float("nan"))
            else:
                rates.append(convergence_rate(ea, eb, a.dt, b.dt))
        series.rates[metric] = rates
    series.window = select_window(series.rates["e_l2"])
    lo, hi = series.window
    if hi > lo:
        series.window_rate_l2 = float(np.mean(series.rates["e_l2"][lo:hi]))
    return series


# ---------------------------------------------------------------------------
# CPU benchmark
# ---------------------------------------------------------------------------


@dataclass
class BenchRow:
    scheme: str
    e_l2: float
    e_h1: float
    dt: float
    cpu_total: float
    cpu_per_step: float
    n_steps: int


def _snap_dt(T: float, dt: float) -> float:
    """Largest step of the form T/n not exceeding dt."""
    n = max(int(np.ceil(T / dt - 1e-12)), 1)
    return T / n


def time_scheme(problem: Problem, scheme: str, dt: float, T: float,
                repetitions: int = 3) -> RunResult:
    """Median-timed run: one warm-up plus ``repetitions`` timed runs."""
    run_simulation(problem, scheme, dt, min(T, 50 * dt), check_every=1000)
    results = [run_simulation(problem, scheme, dt, T, check_every=1000)
               for _ in range(repetitions)]
    walls = [r.wall_time for r in results]
    med = statistics.median(walls)
    best = min(results, key=lambda r: abs(r.wall_time - med))
    return best


def find_dt_for_error(problem: Problem, scheme: str, target: float,
                      reference: ReferenceSolution, dt_start: float,
                      dt_max: float | None = None, rel_window: float = 0.1,
                      max_iter: int = 12) -> tuple[float, float, float]:
    """Time-step reaching the target L2 error within +-10 percent.

    Iterates dt <- dt*(target/e)^(1/q) with q the scheme's nominal order.
    Raises TargetUnreachable when stability caps the step before the target
    error is reached from below.
    """
    q = NOMINAL_ORDER[scheme.lower().replace("-", "_")]
    T = reference.T
    dt = _snap_dt(T, dt_start if dt_max is None else min(dt_start, dt_max))
    last = None
    unstable_above = dt_max  # smallest step observed (or declared) unstable
    for _ in range(max_iter):
        res = run_simulation(problem, scheme, dt, T, check_every=1000)
        if res.status != "completed":
            unstable_above = dt if unstable_above is None else min(unstable_above, dt)
            dt = _snap_dt(T, dt * 0.5)
            continue
        e, eh1 = error_norms(res.final.u, reference.u_final, problem.grid)
        last = (dt, e, eh1)
        if abs(e - target) <= rel_window * target:
            return dt, e, eh1
        dt_next = dt * min((target / e) ** (1.0 / q), 4.0)
        if unstable_above is not None and dt_next >= unstable_above:
            if e < target * (1.0 - rel_window):
                raise TargetUnreachable(
                    f"{scheme}: error {e:.3e} at the stability limit is already "
                    f"below target {target:.3e}", error_at_limit=e)
            dt_next = 0.5 * (dt + unstable_above)
        dt_new = _snap_dt(T, dt_next)
        if dt_new == dt:
            n = round(T / dt)
            dt_new = T / (n + 1) if dt_next < dt else T / max(n - 1, 1)
        dt = dt_new
    if last is None:
        raise TargetUnreachable(f"{scheme}: no stable step found", error_at_limit=np.nan)
    raise TargetUnreachable(
        f"{scheme}: search did not settle within {max_iter} iterations "
        f"(last error {last[1]:.3e} at dt={last[0]:.3e})", error_at_limit=last[1])


def cpu_benchmark(problem: Problem, schemes: list[str], target_rel_l2: float,
                  reference: ReferenceSolution, dt_hints: dict[str, float],
                  dt_caps: dict[str, float] | None = None,
                  repetitions: int = 3) -> list[BenchRow]:
    """CPU cost of each scheme at a common relative-L2-error target.

    The target is expressed relative to the reference solution's L2 norm;
    wall-clock time is the median of ``repetitions`` single-threaded runs
    after a warm-up.
    """
    target = target_rel_l2 * reference.l2_norm
    out = []
    for scheme in schemes:
        cap = None if dt_caps is None else dt_caps.get(scheme)
        dt, e, eh1 = find_dt_for_error(problem, scheme, target, reference,
                                       dt_hints[scheme], dt_max=cap)
        res = time_scheme(problem, scheme, dt, reference.T, repetitions)
        out.append(BenchRow(scheme=scheme, e_l2=e, e_h1=eh1, dt=dt,
                            cpu_total=res.wall_time,
                            cpu_per_step=res.cpu_per_step,
                            n_steps=res.n_steps))
    return out


def per_step_cost(problem: Problem, scheme: str, dt: float, T: float,
                  repetitions: int = 3) -> float:
    """Median per-step wall time at a fixed step count."""
    res = time_scheme(problem, scheme, dt, T, repetitions)
    return res.cpu_per_step
