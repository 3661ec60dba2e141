"""The eight time-stepping schemes behind one init/step/output interface.

All schemes advance the fully discretized monodomain unknowns (U, V, X) by a
constant time-step.  Diffusion acts on U only; the implicit solves reuse one
cached tridiagonal factorization per scheme instance.  Multistep schemes
(SBDF2, RL-CNAB) store the previous reaction evaluation rather than the
previous state, so the ionic terms are evaluated once per step.

The third-order deferred-correction scheme is a three-level cascade whose
corrected output lags the base level by two steps; its driver therefore runs
two extra steps so the corrected solution exists at the final time.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .cells.base import CellModel
from .errors import NotYetAvailable, NumericalOverflow
from .grid import Grid1D, Stimulus1D, laplacian_apply, laplacian_bands
from .kernels import TridiagonalOperator, tridiag_factor

SCHEMES = ("fe", "fbe", "rl_fbe", "sbdf2", "cn_rk2", "cn_rk4", "rl_cnab", "dc3")

FIRST_ORDER = ("fe", "fbe", "rl_fbe")
SECOND_ORDER = ("sbdf2", "cn_rk2", "cn_rk4", "rl_cnab")

NOMINAL_ORDER = {"fe": 1, "fbe": 1, "rl_fbe": 1, "sbdf2": 2, "cn_rk2": 2,
                 "cn_rk4": 2, "rl_cnab": 2, "dc3": 3}

# reaction evaluations per step, used by the cost accounting
REACTION_EVALS_PER_STEP = {"fe": 1, "fbe": 1, "rl_fbe": 1, "sbdf2": 1,
                           "cn_rk2": 4, "cn_rk4": 8, "rl_cnab": 1, "dc3": 3}


def phi(x):
    """Phi(x) = (exp(x) - 1)/x with Phi(0) = 1, accurate for tiny |x|."""
    x = np.asarray(x, dtype=float)
    small = x == 0.0
    safe = np.where(small, 1.0, x)
    with np.errstate(over="ignore", invalid="ignore"):
        val = np.expm1(safe) / safe
    return np.where(small, 1.0, val)


@dataclass
class FieldState:
    """Discretized unknowns at one time level (node-major gating block)."""

    t: float
    u: np.ndarray          # (n,)
    v: np.ndarray          # (n, p)
    x: np.ndarray          # (n, q)

    def copy(self) -> "FieldState":
        return FieldState(self.t, self.u.copy(), self.v.copy(), self.x.copy())


@dataclass
class Problem:
    """Monodomain problem definition shared by all schemes."""

    model: CellModel
    grid: Grid1D
    sigma: float
    stimulus: Stimulus1D

    def initial_state(self) -> FieldState:
        u, v, x = self.model.rest_field(self.grid.n_nodes)
        return FieldState(0.0, u, v, x)

    def stim_profile(self) -> np.ndarray:
        return self.stimulus.space_profile(self.grid.x)


class Stepper:
    """Base class: configure with a problem and a time-step, then call
    :meth:`start` once and :meth:`step` repeatedly."""

    scheme = ""
    output_lag = 0  # steps between the base level and the exposed output

    def __init__(self, problem: Problem, dt: float):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.problem = problem
        self.model = problem.model
        self.grid = problem.grid
        self.dt = float(dt)
        self._profile = problem.stim_profile()
        self._sub, self._diag, self._sup = laplacian_bands(problem.grid, problem.sigma)
        self._ops: dict[float, TridiagonalOperator] = {}
        self.n_steps = 0
        self.state: FieldState | None = None

    # -- infrastructure ----------------------------------------------------

    def implicit_op(self, scale: float, theta: float) -> TridiagonalOperator:
        """Factorization of (scale*I - theta*dt*A), cached per coefficients."""
        key = (scale, theta)
        op = self._ops.get(key)
        if op is None:
            c = theta * self.dt
            op = tridiag_factor(-c * self._sub, scale - c * self._diag, -c * self._sup)
            self._ops[key] = op
        return op

    def stim(self, t: float) -> np.ndarray | float:
        f = self.problem.stimulus.time_factor(t)
        return self._profile * f if f != 0.0 else 0.0

    def lap(self, u: np.ndarray) -> np.ndarray:
        return laplacian_apply(self.grid, self.problem.sigma, u)

    def reaction(self, u, v, x, t):
        return self.model.reaction(u, v, x, self.stim(t))

    # -- interface ---------------------------------------------------------

    def start(self, state: FieldState) -> None:
        self.state = state.copy()
        self.n_steps = 0

    def step(self) -> None:
        raise NotImplementedError

    def current_state(self) -> FieldState:
        """Scheme-defined output (lags the base level for DC3)."""
        if self.state is None:
            raise NotYetAvailable("stepper not started")
        return self.state

    def current_output(self) -> tuple[float, np.ndarray] | None:
        """(time, potential) of the newest available output, or None."""
        s = self.current_state()
        return s.t, s.u


class ForwardEulerStepper(Stepper):
    scheme = "fe"

    def step(self):
        s = self.state
        du, dv, dx = self.reaction(s.u, s.v, s.x, s.t)
        s.u += self.dt * (du + self.lap(s.u))
        s.v += self.dt * dv
        s.x += self.dt * dx
        self.n_steps += 1
        s.t = self.n_steps * self.dt


class ForwardBackwardEulerStepper(Stepper):
    scheme = "fbe"

    def step(self):
        s = self.state
        du, dv, dx = self.reaction(s.u, s.v, s.x, s.t)
        op = self.implicit_op(1.0, 1.0)
        s.u = op.solve(s.u + self.dt * du)
        s.v += self.dt * dv
        s.x += self.dt * dx
        self.n_steps += 1
        s.t = self.n_steps * self.dt


class RushLarsenFBEStepper(Stepper):
    """First-order Rush-Larsen: exact exponential gate update, FBE potential,
    explicit Euler concentrations."""

    scheme = "rl_fbe"

    def step(self):
        s = self.state
        du, a, b, dx = self.model.reaction_rl(s.u, s.v, s.x, self.stim(s.t))
        op = self.implicit_op(1.0, 1.0)
        s.u = op.solve(s.u + self.dt * du)
        s.v += self.dt * phi(a * self.dt) * (a * s.v + b)
        s.x += self.dt * dx
        self.n_steps += 1
        s.t = self.n_steps * self.dt


class SBDF2Stepper(Stepper):
    """Semi-implicit BDF2; bootstrapped with one FBE step."""

    scheme = "sbdf2"

    def start(self, state):
        super().start(state)
        self._prev = None      # (u, v, x) at level n-1
        self._prev_rhs = None  # reaction at level n-1

    def step(self):
        s = self.state
        rhs = self.reaction(s.u, s.v, s.x, s.t)
        if self._prev_rhs is None:
            self._prev = (s.u.copy(), s.v.copy(), s.x.copy())
            op = self.implicit_op(1.0, 1.0)
            u_new = op.solve(s.u + self.dt * rhs[0])
            v_new = s.v + self.dt * rhs[1]
            x_new = s.x + self.dt * rhs[2]
        else:
            pu, pv, px = self._prev
            pdu, pdv, pdx = self._prev_rhs
            op = self.implicit_op(1.5, 1.0)
            u_new = op.solve(2.0 * s.u - 0.5 * pu + self.dt * (2.0 * rhs[0] - pdu))
            v_new = (2.0 * s.v - 0.5 * pv + self.dt * (2.0 * rhs[1] - pdv)) / 1.5
            x_new = (2.0 * s.x - 0.5 * px + self.dt * (2.0 * rhs[2] - pdx)) / 1.5
            self._prev = (s.u, s.v, s.x)
        self._prev_rhs = rhs
        self.state = FieldState(0.0, u_new, v_new, x_new)
        self.n_steps += 1
        self.state.t = self.n_steps * self.dt


class _StrangStepper(Stepper):
    """Strang composition: half-step explicit RK on the reaction, full
    Crank-Nicolson diffusion solve, second half-step RK.  Stage times follow
    the quarter-step offsets of the written scheme."""

    def _rk_half(self, u, v, x, t):
        raise NotImplementedError

    def step(self):
        s = self.state
        h = self.dt
        u, v, x = self._rk_half(s.u, s.v, s.x, s.t)
        op = self.implicit_op(1.0, 0.5)
        u = op.solve(u + 0.5 * h * self.lap(u))
        u, v, x = self._rk_half(u, v, x, s.t + 0.5 * h)
        self.state = FieldState(0.0, u, v, x)
        self.n_steps += 1
        self.state.t = self.n_steps * self.dt


class CNRK2Stepper(_StrangStepper):
    scheme = "cn_rk2"

    def _rk_half(self, u, v, x, t):
        h2 = 0.5 * self.dt   # half-step size
        k1 = self.reaction(u, v, x, t)
        mu = u + 0.5 * h2 * k1[0]
        mv = v + 0.5 * h2 * k1[1]
        mx = x + 0.5 * h2 * k1[2]
        k2 = self.reaction(mu, mv, mx, t + 0.5 * h2)
        return u + h2 * k2[0], v + h2 * k2[1], x + h2 * k2[2]


class CNRK4Stepper(_StrangStepper):
    scheme = "cn_rk4"

    def _rk_half(self, u, v, x, t):
        h2 = 0.5 * self.dt
        k1 = self.reaction(u, v, x, t)
        k2 = self.reaction(u + 0.5 * h2 * k1[0], v + 0.5 * h2 * k1[1],
                           x + 0.5 * h2 * k1[2], t + 0.5 * h2)
        k3 = self.reaction(u + 0.5 * h2 * k2[0], v + 0.5 * h2 * k2[1],
                           x + 0.5 * h2 * k2[2], t + 0.5 * h2)
        k4 = self.reaction(u + h2 * k3[0], v + h2 * k3[1], x + h2 * k3[2], t + h2)
        w = h2 / 6.0
        return (u + w * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
                v + w * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
                x + w * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]))


class RLCNABStepper(Stepper):
    """Second-order Rush-Larsen: CNAB potential, AB2 concentrations, gates by
    the exponential update with midpoint-extrapolated coefficients
    (3/2 a^n - 1/2 a^{n-1}); the first step uses a^{1/2} = a^0."""

    scheme = "rl_cnab"

    def start(self, state):
        super().start(state)
        self._prev = None  # (du, a, b, dx) at level n-1

    def step(self):
        s = self.state
        h = self.dt
        du, a, b, dx = self.model.reaction_rl(s.u, s.v, s.x, self.stim(s.t))
        if self._prev is None:
            du_ab, dx_ab = du, dx
            a_mid, b_mid = a, b
        else:
            pdu, pa, pb, pdx = self._prev
            du_ab = 1.5 * du - 0.5 * pdu
            dx_ab = 1.5 * dx - 0.5 * pdx
            a_mid = 1.5 * a - 0.5 * pa
            b_mid = 1.5 * b - 0.5 * pb
        op = self.implicit_op(1.0, 0.5)
        s.u = op.solve(s.u + 0.5 * h * self.lap(s.u) + h * du_ab)
        s.v += h * phi(a_mid * h) * (a_mid * s.v + b_mid)
        s.x += h * dx_ab
        self._prev = (du, a, b, dx)
        self.n_steps += 1
        s.t = self.n_steps * self.dt


class DC3Stepper(Stepper):
    """Third-order deferred correction.

    Level 0 is forward-backward Euler; levels 1 and 2 integrate scaled error
    equations driven by divided differences of the lower levels.  The
    corrected output Y0 + dt*Y1 + dt^2*Y2 at step n-1 becomes available while
    level 0 stands at step n+1, so the exposed solution lags by two steps.
    """

    scheme = "dc3"
    output_lag = 2

    def start(self, state):
        super().start(state)
        n, p, q = self.grid.n_nodes, self.model.p, self.model.q
        zeros = lambda: (np.zeros(n), np.zeros((n, p)), np.zeros((n, q)))
        self._y0 = (state.u.copy(), state.v.copy(), state.x.copy())
        self._y0_prev = None
        self._dy0 = None
        self._d2y0 = None
        self._ml0_prev = None
        self._y1 = zeros()
        self._dy1 = None
        self._ml1_prev = None
        self._y2 = zeros()
        self._out: FieldState | None = None

    @staticmethod
    def _lincomb(scale, a, b):
        """(a - b) * scale, componentwise over (u, v, x) triples."""
        return tuple(scale * (ai - bi) for ai, bi in zip(a, b))

    def step(self):
        h = self.dt
        k = self.n_steps
        t_k = k * h
        inv_h = 1.0 / h
        u0, v0, x0 = self._y0
        op = self.implicit_op(1.0, 1.0)

        # level 0: forward-backward Euler
        ml0 = self.reaction(u0, v0, x0, t_k)
        u0n = op.solve(u0 + h * ml0[0])
        v0n = v0 + h * ml0[1]
        x0n = x0 + h * ml0[2]
        y0_new = (u0n, v0n, x0n)
        dy0_new = self._lincomb(inv_h, y0_new, self._y0)

        if k >= 1:
            # level 1: first corrected sweep.  The reaction difference uses
            # the stored level-0 evaluation of the previous step, which
            # injects the time derivative of the reaction along the base
            # trajectory; with the -1/2 second-difference term this
            # assembles the local error density of the level-0 predictor.
            ml0p = self._ml0_prev
            d2y0_new = self._lincomb(inv_h, dy0_new, self._dy0)
            u1, v1, x1 = self._y1
            ml1 = self.reaction(u0 + h * u1, v0 + h * v1, x0 + h * x1, t_k)
            u1n = op.solve(u1 - 0.5 * h * d2y0_new[0] + (ml1[0] - ml0p[0]))
            v1n = v1 - 0.5 * h * d2y0_new[1] + (ml1[1] - ml0p[1])
            x1n = x1 - 0.5 * h * d2y0_new[2] + (ml1[2] - ml0p[2])
            y1_new = (u1n, v1n, x1n)
            dy1_new = self._lincomb(inv_h, y1_new, self._y1)

            if k >= 2:
                # level 2: second corrected sweep, output at step k-1
                d2y1 = self._lincomb(inv_h, dy1_new, self._dy1)
                d3y0 = self._lincomb(inv_h, d2y0_new, self._d2y0)
                u0p, v0p, x0p = self._y0_prev
                u2, v2, x2 = self._y2
                h2 = h * h
                ml2 = self.reaction(u0p + h * u1 + h2 * u2,
                                    v0p + h * v1 + h2 * v2,
                                    x0p + h * x1 + h2 * x2, t_k - h)
                ml1p = self._ml1_prev
                u2n = op.solve(u2 - 0.5 * h * d2y1[0] + (h / 6.0) * d3y0[0]
                               + inv_h * (ml2[0] - ml1p[0]))
                v2n = v2 - 0.5 * h * d2y1[1] + (h / 6.0) * d3y0[1] \
                    + inv_h * (ml2[1] - ml1p[1])
                x2n = x2 - 0.5 * h * d2y1[2] + (h / 6.0) * d3y0[2] \
                    + inv_h * (ml2[2] - ml1p[2])
                self._y2 = (u2n, v2n, x2n)
                # all three levels taken at the same time level t_{k-1}
                self._out = FieldState(
                    t_k - h,
                    u0p + h * u1 + h2 * u2n,
                    v0p + h * v1 + h2 * v2n,
                    x0p + h * x1 + h2 * x2n,
                )

            self._y1 = y1_new
            self._dy1 = dy1_new
            self._d2y0 = d2y0_new
            self._ml1_prev = ml1

        self._y0_prev = self._y0
        self._y0 = y0_new
        self._dy0 = dy0_new
        self._ml0_prev = ml0
        self.n_steps += 1
        # the raw base level, used for blow-up checks
        self.state = FieldState(self.n_steps * self.dt, u0n, v0n, x0n)

    def current_state(self) -> FieldState:
        if self._out is None:
            raise NotYetAvailable("DC3 corrected output exists from step 2 on")
        return self._out


_STEPPERS = {
    "fe": ForwardEulerStepper,
    "fbe": ForwardBackwardEulerStepper,
    "rl_fbe": RushLarsenFBEStepper,
    "sbdf2": SBDF2Stepper,
    "cn_rk2": CNRK2Stepper,
    "cn_rk4": CNRK4Stepper,
    "rl_cnab": RLCNABStepper,
    "dc3": DC3Stepper,
}


def bootstrap(scheme: str, problem: Problem, dt: float,
              initial: FieldState | None = None) -> Stepper:
    """Create a configured stepper and initialize its history levels."""
    key = scheme.lower().replace("-", "_")
    if key not in _STEPPERS:
        raise KeyError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    st = _STEPPERS[key](problem, dt)
    st.start(initial if initial is not None else problem.initial_state())
    return st


@dataclass
class RunResult:
    """Outcome of one fixed-step simulation."""

    scheme: str
    dt: float
    status: str                     # "completed" | "blowup"
    final: FieldState | None
    blowup_time: float | None
    n_steps: int
    wall_time: float
    probe_trace: np.ndarray | None   # (n_outputs, 1 + n_probes): t, u(x_i)
    crossing_times: tuple[float | None, ...] | None = None
    snapshots: list[FieldState] = field(default_factory=list)
    samples: list[FieldState] = field(default_factory=list)

    @property
    def cpu_per_step(self) -> float:
        return self.wall_time / max(self.n_steps, 1)


def _steps_for(T: float, dt: float) -> int:
    n = int(round(T / dt))
    if abs(n * dt - T) > 1e-9 * max(1.0, T):
        n = int(np.ceil(T / dt - 1e-12))
    return max(n, 1)


def run_simulation(problem: Problem, scheme: str, dt: float, T: float, *,
                   initial: FieldState | None = None,
                   probe_nodes: tuple[int, ...] = (),
                   crossing_threshold: float | None = None,
                   keep_trace: bool = True,
                   snapshot_times: tuple[float, ...] = (),
                   sample_stride: float | None = None,
                   check_every: int = 1) -> RunResult:
    """Advance the problem to time T with a constant step.

    Blow-up (non-finite values or |u| beyond ten bound-widths) aborts the run
    and is reported in the result rather than raised.  ``probe_nodes`` are
    recorded from the scheme's output timeline every step; when
    ``crossing_threshold`` is given, the first upward threshold crossing of
    each probe is interpolated on the fly (so long reference runs need not
    retain the trace).  ``sample_stride`` collects full states for the
    stability scans.
    """
    stepper = bootstrap(scheme, problem, dt, initial)
    n_steps = _steps_for(T, dt) + stepper.output_lag
    u_blow = problem.model.blowup_threshold()

    probes = []
    snapshots = []
    samples = []
    snap_left = sorted(snapshot_times)
    next_sample = 0.0
    n_probes = len(probe_nodes)
    crossings: list[float | None] = [None] * n_probes
    prev_vals: list[float | None] = [None] * n_probes
    prev_t = None

    def record(out: FieldState):
        nonlocal prev_t
        vals = tuple(float(out.u[j]) for j in probe_nodes)
        if keep_trace and n_probes:
            probes.append((out.t,) + vals)
        if crossing_threshold is not None:
            for i, val in enumerate(vals):
                if crossings[i] is not None:
                    continue
                if prev_vals[i] is None:
                    if val >= crossing_threshold:
                        crossings[i] = out.t
                elif prev_vals[i] < crossing_threshold <= val:
                    frac = (crossing_threshold - prev_vals[i]) / (val - prev_vals[i])
                    crossings[i] = prev_t + (out.t - prev_t) * frac
            prev_vals[:] = vals
            prev_t = out.t

    if stepper.output_lag == 0:
        out0 = stepper.current_state()
        if n_probes:
            record(out0)
        if sample_stride is not None:
            samples.append(out0.copy())
            next_sample = sample_stride

    t0 = time.perf_counter()
    status = "completed"
    blow_t = None
    for k in range(n_steps):
        stepper.step()
        base = stepper.state
        if k % check_every == 0 or k == n_steps - 1:
            umax = float(np.max(np.abs(base.u)))
            if not np.isfinite(umax) or umax > u_blow or not np.isfinite(base.u).all():
                status = "blowup"
                blow_t = base.t
                break
        need_out = n_probes or sample_stride is not None or snap_left
        if not need_out:
            continue
        try:
            out = stepper.current_state()
        except NotYetAvailable:
            continue
        if n_probes:
            record(out)
        if sample_stride is not None and out.t >= next_sample - 1e-12:
            samples.append(out.copy())
            next_sample += sample_stride
        while snap_left and out.t >= snap_left[0] - 1e-9:
            snapshots.append(out.copy())
            snap_left.pop(0)
    wall = time.perf_counter() - t0

    final = None
    if status == "completed":
        final = stepper.current_state().copy()
        if not np.isfinite(final.u).all() or not np.isfinite(final.v).all() \
                or not np.isfinite(final.x).all():
            status = "blowup"
            blow_t = final.t
            final = None
    return RunResult(
        scheme=scheme, dt=dt, status=status, final=final, blowup_time=blow_t,
        n_steps=n_steps, wall_time=wall,
        probe_trace=np.array(probes) if (keep_trace and n_probes) else None,
        crossing_times=tuple(crossings) if crossing_threshold is not None else None,
        snapshots=snapshots, samples=samples,
    )
