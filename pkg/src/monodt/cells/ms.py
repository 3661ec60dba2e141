"""Mitchell-Schaeffer two-variable phenomenological model (nondimensional).

State: potential u in [0, 1] and one recovery gate v.  The gate law is
piecewise in u around u_gate; exactly at u_gate the lower branch is used.
"""

from __future__ import annotations

import numpy as np

from .base import CellModel


class MSModel(CellModel):
    name = "ms"
    p = 1
    q = 0
    membrane_capacity = 1.0
    gate_names = ("v",)
    conc_names = ()
    default_params = {
        "tau_in": 0.3,
        "tau_out": 6.0,
        "tau_open": 120.0,
        "tau_close": 150.0,
        "u_gate": 0.13,
    }
    # (u, v) = (0, 1) is an exact equilibrium of the model
    _rest = (0.0, 1.0)
    _bounds = ((-0.4, 1.4), (0.0, 1.0))

    @property
    def switch_potentials(self) -> tuple[float, ...]:
        return (self.params["u_gate"],)

    def terms(self, u, v, x):
        pr = self.params
        vv = v[:, 0]
        with np.errstate(over="ignore", invalid="ignore"):
            # I_ion enters du/dt = (i_app - I_ion)/C_m, so it carries a minus
            # sign relative to the inward/outward current split of this model
            iion = u / pr["tau_out"] - vv * u * u * (1.0 - u) / pr["tau_in"]
        closed = u > pr["u_gate"]
        a = np.where(closed, -1.0 / pr["tau_close"], -1.0 / pr["tau_open"])
        b = np.where(closed, 0.0, 1.0 / pr["tau_open"])
        return iion, a[:, None], b[:, None], np.empty((u.shape[0], 0))
