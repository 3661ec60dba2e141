"""Common interface of the ionic cell models.

Every model exposes its reaction right-hand side in the split form

    du/dt = (i_app - I_ion(u, v, x)) / C_m
    dv/dt = a(u) * v + b(u)          (Hodgkin-Huxley gating form)
    dx/dt = g(u, v, x)               (concentrations)

The gating coefficients (a, b) are the primitive quantity; the gate
right-hand side is assembled as a*v + b, so the rate-split identity holds
exactly.  All evaluation methods are vectorized over grid nodes and pure
(no shared mutable state), so models are safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NumericalOverflow, SwitchProximity

# Central differencing uses the cube root of machine precision, which
# balances truncation against round-off for second-order differences.
EPS_REL = float(np.finfo(float).eps) ** (1.0 / 3.0)


@dataclass(frozen=True)
class CellState:
    """State of a single cell: potential, gates, concentrations."""

    u: float
    v: np.ndarray
    x: np.ndarray

    def pack(self) -> np.ndarray:
        return np.concatenate(([self.u], self.v, self.x))

    @staticmethod
    def unpack(y: np.ndarray, p: int, q: int) -> "CellState":
        return CellState(u=float(y[0]), v=np.array(y[1:1 + p]), x=np.array(y[1 + p:1 + p + q]))


@dataclass(frozen=True)
class RateSplit:
    """Gating rates: dv_i/dt = a_i * v_i + b_i."""

    a: np.ndarray
    b: np.ndarray

    @property
    def v_inf(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.a != 0.0, -self.b / self.a, np.nan)


class CellModel:
    """Base class for ionic models.  Subclasses fill in the class attributes
    and implement :meth:`terms`."""

    name: str = ""
    p: int = 0
    q: int = 0
    membrane_capacity: float = 1.0
    gate_names: tuple[str, ...] = ()
    conc_names: tuple[str, ...] = ()
    # potentials at which the right-hand side switches branches
    switch_potentials: tuple[float, ...] = ()
    default_params: dict[str, float] = {}
    # refined rest state, set by each subclass (pack() layout)
    _rest: tuple[float, ...] = ()
    # residual drift ||rhs||_inf left at the frozen rest state
    equilibrium_residual: float = 1e-12
    # per-variable physiological [lo, hi] in pack() layout
    _bounds: tuple[tuple[float, float], ...] = ()

    def __init__(self, **overrides: float):
        params = dict(self.default_params)
        for key, val in overrides.items():
            if key not in params:
                raise KeyError(f"{self.name}: unknown parameter {key!r}")
            params[key] = float(val)
        self.params = params

    # -- model-specific ---------------------------------------------------

    def terms(self, u: np.ndarray, v: np.ndarray, x: np.ndarray
              ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Return (I_ion, a, b, dx) for nodal arrays u (n,), v (n,p), x (n,q)."""
        raise NotImplementedError

    # -- generic interface -------------------------------------------------

    @property
    def n_vars(self) -> int:
        return 1 + self.p + self.q

    @property
    def var_names(self) -> tuple[str, ...]:
        return ("u",) + self.gate_names + self.conc_names

    @property
    def rest_state(self) -> CellState:
        y = np.array(self._rest, dtype=float)
        return CellState.unpack(y, self.p, self.q)

    @property
    def bounds(self) -> np.ndarray:
        return np.array(self._bounds, dtype=float)

    def blowup_threshold(self) -> float:
        lo, hi = self._bounds[0]
        return 10.0 * (hi - lo)

    def reaction(self, u, v, x, i_app):
        """Full right-hand side (du, dv, dx); i_app may be scalar or (n,)."""
        iion, a, b, dx = self.terms(u, v, x)
        du = (i_app - iion) / self.membrane_capacity
        dv = a * v + b
        return du, dv, dx

    def reaction_rl(self, u, v, x, i_app):
        """Right-hand side in Rush-Larsen form: (du, a, b, dx)."""
        iion, a, b, dx = self.terms(u, v, x)
        du = (i_app - iion) / self.membrane_capacity
        return du, a, b, dx

    def rest_field(self, n_nodes: int):
        """(u, v, x) nodal arrays holding the rest state at every node."""
        rest = self.rest_state
        u = np.full(n_nodes, rest.u)
        v = np.tile(rest.v, (n_nodes, 1))
        x = np.tile(rest.x, (n_nodes, 1))
        return u, v, x


def eval_reaction(model: CellModel, state: CellState, i_app: float = 0.0
                  ) -> tuple[float, np.ndarray, np.ndarray]:
    """Reaction right-hand side at a single cell state.

    Raises
    ------
    NumericalOverflow
        If any output component is non-finite, carrying the index of the
        first offending variable (pack() layout).
    """
    u = np.array([state.u])
    v = state.v.reshape(1, -1)
    x = state.x.reshape(1, -1)
    du, dv, dx = model.reaction(u, v, x, i_app)
    packed = np.concatenate((du, dv[0], dx[0]))
    if not np.isfinite(packed).all():
        idx = int(np.flatnonzero(~np.isfinite(packed))[0])
        raise NumericalOverflow("non-finite reaction output", variable_index=idx)
    return float(du[0]), dv[0], dx[0]


def rate_split(model: CellModel, u: float, state: CellState | None = None) -> RateSplit:
    """Gating rates a_i(u), b_i(u) at potential u.

    For models whose gating laws also depend on other state variables (the
    calcium-gated channels of TNNP), those variables are taken from ``state``
    when given, and from the rest state otherwise.
    """
    base = state if state is not None else model.rest_state
    uu = np.array([float(u)])
    v = base.v.reshape(1, -1)
    x = base.x.reshape(1, -1)
    _, a, b, _ = model.terms(uu, v, x)
    return RateSplit(a=a[0], b=b[0])


def _typical_scales(model: CellModel) -> np.ndarray:
    b = model.bounds
    typ = np.maximum(np.abs(b[:, 0]), np.abs(b[:, 1]))
    return np.maximum(typ, 1e-12)


def shift_off_switches(model: CellModel, u, h_u, switch_delta: float = 1e-6):
    """Move potentials clear of branch switches before differencing.

    A potential within (h_u + switch_delta) of a switch would make the
    difference stencil straddle the branch jump, producing spuriously large
    eigenvalues; such points are moved to the boundary of the protected zone
    on the side they came from (the lower branch wins ties).
    """
    u = np.array(u, dtype=float, copy=True)
    for us in model.switch_potentials:
        guard = h_u + switch_delta
        mask = np.abs(u - us) <= guard
        if np.any(mask):
            side = np.where(u > us, 1.0, -1.0)
            u = np.where(mask, us + side * guard * (1.0 + 1e-3), u)
    return u


def jacobian_batch(model: CellModel, u, v, x, i_app=0.0, *,
                   eps_rel: float = EPS_REL, switch_delta: float = 1e-6) -> np.ndarray:
    """Numerical Jacobians of the reaction at every node, shape (n, nv, nv).

    Central differences with per-variable steps eps_rel * max(|s_l|, typ_l);
    potentials near a switching threshold are shifted off it first.
    """
    n = u.shape[0]
    nv = model.n_vars
    typ = _typical_scales(model)
    h_u_max = eps_rel * max(typ[0], float(np.max(np.abs(u))) if n else typ[0])
    u = shift_off_switches(model, u, h_u_max, switch_delta)

    def rhs(uu, vv, xx):
        du, dv, dx = model.reaction(uu, vv, xx, i_app)
        return np.concatenate((du[:, None], dv, dx), axis=1)

    jac = np.empty((n, nv, nv))
    for col in range(nv):
        if col == 0:
            h = eps_rel * np.maximum(np.abs(u), typ[0])
            up = rhs(u + h, v, x)
            um = rhs(u - h, v, x)
        elif col < 1 + model.p:
            g = col - 1
            h = eps_rel * np.maximum(np.abs(v[:, g]), typ[col])
            vp = v.copy(); vp[:, g] += h
            vm = v.copy(); vm[:, g] -= h
            up = rhs(u, vp, x)
            um = rhs(u, vm, x)
        else:
            c = col - 1 - model.p
            h = eps_rel * np.maximum(np.abs(x[:, c]), typ[col])
            xp = x.copy(); xp[:, c] += h
            xm = x.copy(); xm[:, c] -= h
            up = rhs(u, v, xp)
            um = rhs(u, v, xm)
        jac[:, :, col] = (up - um) / (2.0 * h)[:, None]
    return jac


def numerical_jacobian(model: CellModel, state: CellState, i_app: float = 0.0, *,
                       eps_rel: float = EPS_REL, switch_delta: float = 1e-6) -> np.ndarray:
    """Dense numerical Jacobian of the reaction at one state.

    Raises
    ------
    SwitchProximity
        If the evaluation point cannot be moved clear of a switch (only
        possible when two switches are closer than the stencil width).
    """
    typ = _typical_scales(model)
    h_u = eps_rel * max(abs(state.u), typ[0])
    u_shifted = float(shift_off_switches(model, np.array([state.u]), h_u, switch_delta)[0])
    for us in model.switch_potentials:
        if abs(u_shifted - us) <= h_u + switch_delta:
            raise SwitchProximity(
                f"u={state.u} cannot be differenced clear of switch at {us}")
    u = np.array([u_shifted])
    v = state.v.reshape(1, -1)
    x = state.x.reshape(1, -1)
    return jacobian_batch(model, u, v, x, i_app,
                          eps_rel=eps_rel, switch_delta=switch_delta)[0]


def find_equilibrium(model: CellModel, start: CellState | None = None,
                     tol: float = 1e-12, max_iter: int = 200) -> CellState:
    """Refine an approximate rest state with a damped Newton iteration.

    Used offline to pin down the frozen rest states; kept in the library so
    the refinement is reproducible when model parameters are overridden.
    """
    y = (start if start is not None else model.rest_state).pack()
    p, q = model.p, model.q

    def rhs_of(yy):
        s = CellState.unpack(yy, p, q)
        du, dv, dx = model.reaction(np.array([s.u]), s.v.reshape(1, -1),
                                    s.x.reshape(1, -1), 0.0)
        return np.concatenate((du, dv[0], dx[0]))

    best = y.copy()
    best_res = np.max(np.abs(rhs_of(y)))
    for _ in range(max_iter):
        res = rhs_of(y)
        rnorm = np.max(np.abs(res))
        if rnorm < best_res:
            best, best_res = y.copy(), rnorm
        if rnorm < tol:
            break
        jac = jacobian_batch(model, np.array([y[0]]), y[1:1 + p].reshape(1, -1),
                             y[1 + p:].reshape(1, -1))[0]
        try:
            step = np.linalg.solve(jac, res)
        except np.linalg.LinAlgError:
            break
        lam = 1.0
        for _ in range(30):
            y_try = y - lam * step
            r_try = rhs_of(y_try)
            if np.isfinite(r_try).all() and np.max(np.abs(r_try)) < rnorm:
                y = y_try
                break
            lam *= 0.5
        else:
            break
    return CellState.unpack(best, p, q)
