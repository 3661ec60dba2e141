"""Beeler-Reuter ventricular model (1977).

Six Hodgkin-Huxley gates (m, h, j, d, f, x1), one calcium concentration and
four membrane currents (fast sodium, slow inward calcium, and two potassium
currents).  All rate functions are smooth, so this is the one model whose
Jacobian could also be written analytically.

Potentials in mV, time in ms, currents in uA/cm^2.
"""

from __future__ import annotations

import numpy as np

from .base import CellModel


def _guarded_ratio(x, rate, limit):
    """x / (1 - exp(-rate*x)) with its removable singularity at x = 0."""
    small = np.abs(x) < 1e-9
    safe = np.where(small, 1.0, x)
    with np.errstate(over="ignore", invalid="ignore"):
        val = safe / (-np.expm1(-rate * safe))
    return np.where(small, limit, val)


class BRModel(CellModel):
    name = "br"
    p = 6
    q = 1
    membrane_capacity = 1.0  # uF/cm^2
    gate_names = ("m", "h", "j", "d", "f", "x1")
    conc_names = ("cai",)
    switch_potentials = ()
    default_params = {
        "g_na": 4.0,
        "g_nac": 0.003,
        "e_na": 50.0,
        "g_s": 0.09,
        "c_m": 1.0,
    }
    # equilibrium refined to ||rhs||_inf < 1e-13 (find_equilibrium)
    _rest = (
        -84.57375612244096,       # u
        0.010981968724138679,     # m
        0.9877211754239834,       # h
        0.9748381388026095,       # j
        0.0029707246570884125,    # d
        0.9999813338833057,       # f
        0.005628650571354657,     # x1
        1.7820072201172344e-07,   # cai
    )
    _bounds = (
        (-110.0, 60.0),
        (0.0, 1.0), (0.0, 1.0), (0.0, 1.0), (0.0, 1.0), (0.0, 1.0), (0.0, 1.0),
        (1e-9, 1e-2),
    )

    def __init__(self, **overrides):
        super().__init__(**overrides)
        self.membrane_capacity = self.params["c_m"]

    # scalar factors folded out of the rate expressions
    _E340 = float(np.exp(0.04 * 85.0))
    _E424 = float(np.exp(0.08 * 53.0))
    _E212 = float(np.exp(0.04 * 53.0))
    _E308 = float(np.exp(0.04 * 77.0))
    _E140 = float(np.exp(0.04 * 35.0))
    _EJ = float(0.055 * np.exp(-0.25))
    _EBF = float(np.exp(9.6))
    _EBX1 = float(np.exp(-0.8))

    def terms(self, u, v, x):
        pr = self.params
        m = v[:, 0]; h = v[:, 1]; j = v[:, 2]
        d = v[:, 3]; f = v[:, 4]; x1 = v[:, 5]
        cai = x[:, 0]

        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            e04 = np.exp(0.04 * u)

            # potassium currents
            i_k1 = 0.35 * (
                4.0 * (e04 * self._E340 - 1.0)
                / (e04 * e04 * self._E424 + e04 * self._E212)
                + 0.2 * _guarded_ratio(u + 23.0, 0.04, 5.0)
            )
            i_x1 = x1 * (0.8 / self._E140) * (e04 * self._E308 - 1.0) / e04

            # fast sodium and slow inward currents
            i_na = (pr["g_na"] * m * m * m * h * j + pr["g_nac"]) * (u - pr["e_na"])
            e_s = -82.3 - 13.0287 * np.log(cai)
            i_s = pr["g_s"] * d * f * (u - e_s)

            # gate rates
            a_m = _guarded_ratio(u + 47.0, 0.1, 10.0)
            b_m = 40.0 * np.exp(-0.056 * (u + 72.0))
            e25_77 = np.exp(-0.25 * (u + 77.0))
            a_h = 0.126 * e25_77
            b_h = 1.7 / (np.exp(-0.082 * (u + 22.5)) + 1.0)
            e2_78 = np.exp(-0.2 * (u + 78.0))
            a_j = self._EJ * e25_77 / (e2_78 + 1.0)
            b_j = 0.3 / (np.exp(-0.1 * (u + 32.0)) + 1.0)
            a_d = 0.095 * np.exp(-0.01 * (u - 5.0)) / (np.exp(-0.072 * (u - 5.0)) + 1.0)
            b_d = 0.07 * np.exp(-0.017 * (u + 44.0)) / (np.exp(0.05 * (u + 44.0)) + 1.0)
            a_f = 0.012 * np.exp(-0.008 * (u + 28.0)) / (np.exp(0.15 * (u + 28.0)) + 1.0)
            b_f = 0.0065 * np.exp(-0.02 * (u + 30.0)) / (e2_78 * self._EBF + 1.0)
            a_x1 = 0.0005 * np.exp(0.083 * (u + 50.0)) / (np.exp(0.057 * (u + 50.0)) + 1.0)
            b_x1 = 0.0013 * np.exp(-0.06 * (u + 20.0)) / (self._EBX1 / e04 + 1.0)

            iion = i_k1 + i_x1 + i_na + i_s

            n = u.shape[0]
            a = np.empty((6, n))
            b = np.empty((6, n))
            np.add(a_m, b_m, out=a[0]); b[0] = a_m
            np.add(a_h, b_h, out=a[1]); b[1] = a_h
            np.add(a_j, b_j, out=a[2]); b[2] = a_j
            np.add(a_d, b_d, out=a[3]); b[3] = a_d
            np.add(a_f, b_f, out=a[4]); b[4] = a_f
            np.add(a_x1, b_x1, out=a[5]); b[5] = a_x1
            np.negative(a, out=a)

            dcai = -1e-7 * i_s + 0.07 * (1e-7 - cai)
        return iion, a.T, b.T, dcai[:, None]
