"""Absolute-stability analysis: eigenvalue scans along a reference
trajectory, per-scheme theoretical critical time-steps, stability-region
contours, and empirical critical time-steps by bisection.

The linearized semi-discrete problem has system matrix J + A_omega, where J
is the reaction Jacobian at a frozen state and A_omega adds the diffusion
symbol 2*sigma*(cos(omega*h) - 1)/h^2 to the potential row.  Explicit
diffusion is most restrictive at omega = pi/h; semi-implicit schemes are
analyzed at omega = 0, which removes the grid dependence.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cells.base import CellModel, jacobian_batch
from .errors import BracketError, EigenConvergenceError, WaveNotArrived
from .kernels import dense_eigenvalues, eigenvalues_batch
from .steppers import FieldState, Problem, run_simulation

# negative real-axis reach of the classical RK4 stability polynomial,
# |1 + x + x^2/2 + x^3/6 + x^4/24| = 1; computed on import by bisection
_RK4_BOUND: float | None = None


def rk2_stability_bound() -> float:
    """Real-axis reach of 1 + x + x^2/2 (exactly -2)."""
    return -2.0


def rk4_stability_bound(tol: float = 1e-12) -> float:
    """Negative real-axis bound of the RK4 polynomial, by bisection."""
    global _RK4_BOUND
    if _RK4_BOUND is not None:
        return _RK4_BOUND

    def mag(x):
        return abs(1.0 + x + x * x / 2.0 + x ** 3 / 6.0 + x ** 4 / 24.0) - 1.0

    lo, hi = -3.0, -2.5  # mag(lo) > 0, mag(hi) < 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mag(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    _RK4_BOUND = 0.5 * (lo + hi)
    return _RK4_BOUND


def diffusion_symbol(sigma: float, h: float, omega: float) -> float:
    """Entry added to the potential row: 2*sigma*(cos(omega h) - 1)/h^2."""
    return 2.0 * sigma * (np.cos(omega * h) - 1.0) / h ** 2


def build_j_rl(jac: np.ndarray, p: int) -> np.ndarray:
    """Jacobian with the gating rows zeroed.

    Models the limit case of an A-stable exponential gate update (the gate
    amplification factor is at most one, so the restrictive mode keeps the
    gates frozen).  The potential and concentration rows keep the signs of
    the plain linearization; the sign decoration printed on some derivations
    of this matrix does not reproduce the tabulated critical steps and is
    treated as notational.
    """
    out = jac.copy()
    out[..., 1:1 + p, :] = 0.0
    return out


@dataclass(frozen=True)
class ScanResult:
    lambda_min: float
    node: int
    time: float
    state: np.ndarray          # packed state realizing the minimum
    n_states: int
    n_eigensolves: int
    min_real: float


@dataclass
class StabilityReport:
    model: str
    h: float
    sigma: float
    lambda_min_j: float
    lambda_min_j_diff: float    # most negative eigenvalue of J + A_{pi/h}
    lambda_min_j_rl: float | None
    theoretical: dict[str, float] = field(default_factory=dict)
    empirical: dict[str, float] = field(default_factory=dict)
    argmin: dict[str, tuple[int, float]] = field(default_factory=dict)


def _gershgorin_lower(mats: np.ndarray) -> np.ndarray:
    """Row-wise Gershgorin lower bounds, minimized per matrix."""
    diag = np.einsum("...ii->...i", mats)
    radius = np.abs(mats).sum(axis=-1) - np.abs(diag)
    return (diag - radius).min(axis=-1)


def scan_lambda_min(model: CellModel, states: list[FieldState], *,
                    omega_entry: float = 0.0, matrix: str = "J",
                    i_app_trace=None, batch: int = 512,
                    dedupe_digits: int = 7) -> ScanResult:
    """Most negative real eigenvalue of J (+ diffusion entry) over all
    sampled (node, time) pairs of a reference run.

    States are deduplicated to a relative precision of ``dedupe_digits``
    before the eigenvalue pass; candidates are then processed in order of
    their Gershgorin lower bounds, which lets the scan stop as soon as the
    best confirmed eigenvalue certifies the remaining states cannot beat it.
    """
    nv = model.n_vars
    packed = []
    origin = []
    for si, st in enumerate(states):
        arr = np.concatenate((st.u[:, None], st.v, st.x), axis=1)
        packed.append(arr)
        origin.append(np.stack([np.arange(arr.shape[0]),
                                np.full(arr.shape[0], st.t)], axis=1))
    allstates = np.concatenate(packed, axis=0)
    allorigin = np.concatenate(origin, axis=0)
    n_total = allstates.shape[0]

    # dedupe on a rounded mantissa so near-identical rest/plateau states
    # collapse to one representative
    scale = np.maximum(np.abs(allstates).max(axis=0), 1e-30)
    key = np.round(allstates / scale, dedupe_digits)
    _, keep = np.unique(key, axis=0, return_index=True)
    allstates = allstates[keep]
    allorigin = allorigin[keep]
    m = allstates.shape[0]

    jac = np.empty((m, nv, nv))
    for lo in range(0, m, 4096):
        hi = min(lo + 4096, m)
        chunk = allstates[lo:hi]
        jac[lo:hi] = jacobian_batch(model, chunk[:, 0],
                                    chunk[:, 1:1 + model.p],
                                    chunk[:, 1 + model.p:])
    if matrix == "J_RL":
        jac = build_j_rl(jac, model.p)
    elif matrix != "J":
        raise ValueError(f"unknown matrix kind {matrix!r}")
    jac[:, 0, 0] += omega_entry

    glb = _gershgorin_lower(jac)
    order = np.argsort(glb)
    best = np.inf
    best_idx = -1
    n_eigs = 0
    for lo in range(0, m, batch):
        idx = order[lo:lo + batch]
        wr, wi = eigenvalues_batch(jac[idx])
        n_eigs += idx.shape[0]
        real = np.abs(wi) <= 1e-8 * np.maximum(1.0, np.abs(wr))
        wr_masked = np.where(real, wr, np.inf)
        mins = wr_masked.min(axis=1)
        k = int(np.argmin(mins))
        if mins[k] < best:
            best = float(mins[k])
            best_idx = int(idx[k])
        nxt = lo + batch
        if nxt >= m or best <= glb[order[nxt]]:
            break
    if best_idx < 0:
        raise EigenConvergenceError("eigenvalue scan produced no real eigenvalue")
    node, t = allorigin[best_idx]
    spec = dense_eigenvalues(jac[best_idx])
    return ScanResult(lambda_min=best, node=int(node), time=float(t),
                      state=allstates[best_idx].copy(), n_states=n_total,
                      n_eigensolves=n_eigs, min_real=spec.min_real)


def theoretical_dt(scheme: str, *, lambda_min_j: float | None = None,
                   lambda_min_j_diff: float | None = None,
                   lambda_min_j_rl: float | None = None) -> float:
    """Theoretical critical time-step of a scheme from the scanned
    eigenvalues.

    Explicit Euler is bounded by the diffusion-augmented eigenvalue; the
    semi-implicit schemes by the reaction eigenvalue alone; the Rush-Larsen
    schemes by the gate-frozen matrix.  DC3 has no closed-form condition and
    is reported via the forward-backward Euler value, which the experiments
    show it tracks closely.
    """
    key = scheme.lower().replace("-", "_")
    if key == "fe":
        lam = _require(lambda_min_j_diff, "lambda_min_j_diff")
        return -2.0 / lam
    if key in ("fbe", "dc3"):
        lam = _require(lambda_min_j, "lambda_min_j")
        return -2.0 / lam
    if key == "sbdf2":
        lam = _require(lambda_min_j, "lambda_min_j")
        return -4.0 / (3.0 * lam)
    if key == "cn_rk2":
        lam = _require(lambda_min_j, "lambda_min_j")
        return 2.0 * rk2_stability_bound() / lam
    if key == "cn_rk4":
        lam = _require(lambda_min_j, "lambda_min_j")
        return 2.0 * rk4_stability_bound() / lam
    if key == "rl_fbe":
        lam = _require(lambda_min_j_rl, "lambda_min_j_rl")
        return -2.0 / lam
    if key == "rl_cnab":
        lam = _require(lambda_min_j_rl, "lambda_min_j_rl")
        return -1.0 / lam
    raise KeyError(f"unknown scheme {scheme!r}")


def _require(val, name):
    if val is None:
        raise ValueError(f"{name} is required for this scheme")
    return val


def sbdf2_boundary_locus(thetas: np.ndarray) -> np.ndarray:
    """Boundary of the SBDF2 stability region via the root-locus map
    mu(theta) = (-(3/2) e^{2 i theta} + 2 e^{i theta} - 1/2) / (1 - 2 e^{i theta})."""
    z = np.exp(1j * np.asarray(thetas, dtype=float))
    return (-1.5 * z * z + 2.0 * z - 0.5) / (1.0 - 2.0 * z)


def strang_rk_contour(thetas: np.ndarray, order: int) -> np.ndarray:
    """Contour |R(x)| = 1 of the RK2/RK4 half-step polynomial, traced by
    radial bisection along each ray exp(i theta)."""
    if order == 2:
        poly = lambda x: 1.0 + x + x * x / 2.0
    elif order == 4:
        poly = lambda x: 1.0 + x + x ** 2 / 2.0 + x ** 3 / 6.0 + x ** 4 / 24.0
    else:
        raise ValueError("order must be 2 or 4")
    pts = []
    for th in np.asarray(thetas, dtype=float):
        ray = np.exp(1j * th)
        lo, hi = 0.0, 6.0
        if abs(poly(hi * ray)) <= 1.0:
            pts.append(hi * ray)
            continue
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if abs(poly(mid * ray)) <= 1.0:
                lo = mid
            else:
                hi = mid
        pts.append(0.5 * (lo + hi) * ray)
    return np.asarray(pts)


@dataclass(frozen=True)
class StabilityPredicate:
    """Run-to-completion predicate used by the empirical bisection.

    A time-step is stable when the run stays bounded to the final time; for
    the Rush-Larsen schemes a bounded but degenerated wave also counts as
    unstable, detected by the wave failing to reach the far probe or its
    speed straying more than ``speed_rtol`` from the fine-step reference.
    """

    problem: Problem
    T: float
    probe_nodes: tuple[int, int] | None = None
    threshold: float | None = None
    reference_speed: float | None = None
    speed_rtol: float = 0.2

    def __call__(self, scheme: str, dt: float) -> bool:
        res = run_simulation(self.problem, scheme, dt, self.T,
                             probe_nodes=self.probe_nodes or ())
        if res.status != "completed":
            return False
        if self.probe_nodes is not None and self.reference_speed is not None:
            from .bench import depolarization_time, wave_speed
            tr = res.probe_trace
            try:
                t1 = depolarization_time(tr[:, 0], tr[:, 1], self.threshold)
                t2 = depolarization_time(tr[:, 0], tr[:, 2], self.threshold)
                x = self.problem.grid.x
                c = wave_speed(t1, t2, x[self.probe_nodes[0]], x[self.probe_nodes[1]])
            except WaveNotArrived:
                return False
            if abs(c - self.reference_speed) > self.speed_rtol * abs(self.reference_speed):
                return False
        return True


def empirical_dt(scheme: str, predicate, bracket: tuple[float, float],
                 sig_figs: int = 3) -> tuple[float, float]:
    """Largest stable time-step by bisection to the given significant figures.

    Returns (dt_star, resolution); dt_star is the largest step verified
    stable.  Raises BracketError when the bracket does not actually bracket
    the transition.
    """
    lo, hi = bracket
    if not lo < hi:
        raise BracketError(f"invalid bracket {bracket}")
    if not predicate(scheme, lo):
        raise BracketError(f"lower bracket {lo} is not stable for {scheme}")
    if predicate(scheme, hi):
        raise BracketError(f"upper bracket {hi} is not unstable for {scheme}")
    rtol = 10.0 ** (1 - sig_figs)
    while (hi - lo) > 0.5 * rtol * lo:
        mid = 0.5 * (lo + hi)
        if predicate(scheme, mid):
            lo = mid
        else:
            hi = mid
    return lo, hi - lo


def sweep_omega(model: CellModel, state: np.ndarray, sigma: float, h: float,
                n_samples: int = 64) -> np.ndarray:
    """lambda_min of J + A_omega over an omega grid in [0, pi/h].

    Validates numerically that omega = pi/h is the most restrictive wave
    number for the explicit scheme.  Returns rows (omega, lambda_min).
    """
    p, q = model.p, model.q
    jac = jacobian_batch(model, state[:1], state[1:1 + p].reshape(1, -1),
                         state[1 + p:].reshape(1, -1))[0]
    out = np.empty((n_samples, 2))
    for i, om in enumerate(np.linspace(0.0, np.pi / h, n_samples)):
        jj = jac.copy()
        jj[0, 0] += diffusion_symbol(sigma, h, om)
        spec = dense_eigenvalues(jj)
        out[i] = (om, spec.lambda_min if spec.lambda_min is not None else np.nan)
    return out
