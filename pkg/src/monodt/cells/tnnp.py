"""ten Tusscher-Noble-Noble-Panfilov human ventricular model (2004), epicardial.

Twelve Hodgkin-Huxley gates, four concentrations and fifteen membrane
currents.  Currents are expressed per unit membrane capacitance (pA/pF), so
the potential equation uses an effective capacitance of one; the whole-cell
capacitance ``cm`` appears only in the concentration balance factors.

Branch switches: the h and j gate rates switch expression at V = -40 mV, and
the calcium-controlled gates fCa and g are prevented from increasing while
V > -60 mV.  At exactly V = -40 the lower-potential branch is used.
"""

from __future__ import annotations

import numpy as np

from .base import CellModel


class TNNPModel(CellModel):
    name = "tnnp"
    p = 12
    q = 4
    membrane_capacity = 1.0  # currents are already per unit capacitance
    gate_names = ("xr1", "xr2", "xs", "m", "h", "j", "d", "f", "fca", "s", "r", "g")
    conc_names = ("cai", "casr", "nai", "ki")
    switch_potentials = (-40.0, -60.0)
    default_params = {
        "g_na": 14.838,
        "g_k1": 5.405,
        "g_to": 0.294,       # epicardial
        "g_kr": 0.096,
        "g_ks": 0.245,       # epicardial
        "g_cal": 1.75e-4,
        "g_bna": 2.9e-4,
        "g_bca": 5.92e-4,
        "g_pk": 0.0146,
        "g_pca": 0.825,
        "k_pca": 5e-4,
        "p_nak": 1.362,
        "k_mk": 1.0,
        "k_mna": 40.0,
        "k_naca": 1000.0,
        "k_sat": 0.1,
        "alpha_naca": 2.5,
        "gamma_naca": 0.35,
        "km_ca": 1.38,
        "km_nai": 87.5,
        "na_o": 140.0,
        "k_o": 5.4,
        "ca_o": 2.0,
        "p_kna": 0.03,
        "buf_c": 0.15,
        "k_buf_c": 1e-3,
        "buf_sr": 10.0,
        "k_buf_sr": 0.3,
        "vmax_up": 4.25e-4,
        "k_up": 2.5e-4,
        "a_rel": 0.016464,
        "b_rel": 0.25,
        "c_rel": 0.008232,
        "v_leak": 8e-5,
        "tau_g": 2.0,
        "tau_fca": 2.0,
        "cm": 0.185,
        "v_c": 0.016404,
        "v_sr": 1.094e-3,
        "r_gas": 8314.472,
        "t_kelvin": 310.0,
        "faraday": 96485.3415,
    }
    # Quasi-equilibrium: the published initial values settled for six seconds
    # of model time.  This cell model has no physiological exact equilibrium
    # (its true attractor drains intracellular sodium to ~6 mM over minutes),
    # so a residual drift of ~2e-5/ms remains in the slow ion budgets
    # (nai, ki, casr); all fast variables are equilibrated.
    _rest = (
        -86.440834349541134,
        1.7785237155441074e-04,   # xr1
        4.8376436843571635e-01,   # xr2
        2.9670907064620286e-03,   # xs
        1.3256434793750592e-03,   # m
        7.7656931136449303e-01,   # h
        7.7656254336712205e-01,   # j
        1.9234655786294770e-05,   # d
        9.9992451475951472e-01,   # f
        1.0072078313725104e+00,   # fca (its steady state may exceed 1)
        9.9999830556505398e-01,   # s
        1.9749524734486808e-08,   # r
        9.9999677987525015e-01,   # g
        4.2531100933924430e-05,   # cai
        1.8870238031948880e-01,   # casr
        1.1528820041820818e+01,   # nai
        1.3842923505987719e+02,   # ki
    )
    equilibrium_residual = 2.2e-5  # ||rhs||_inf at the frozen rest state
    _bounds = (
        (-110.0, 60.0),
        # gates (fca's steady state reaches 1.048 at low calcium)
        (0.0, 1.0), (0.0, 1.0), (0.0, 1.0), (0.0, 1.0), (0.0, 1.0), (0.0, 1.0),
        (0.0, 1.0), (0.0, 1.0), (0.0, 1.05), (0.0, 1.0), (0.0, 1.0), (0.0, 1.0),
        # cai, casr, nai, ki
        (1e-6, 2e-2), (1e-3, 10.0), (4.0, 20.0), (100.0, 160.0),
    )

    def terms(self, u, v, x):
        pr = self.params
        rtf = pr["r_gas"] * pr["t_kelvin"] / pr["faraday"]
        frt = 1.0 / rtf

        xr1 = v[:, 0]; xr2 = v[:, 1]; xs = v[:, 2]
        m = v[:, 3]; h = v[:, 4]; j = v[:, 5]
        d = v[:, 6]; f = v[:, 7]; fca = v[:, 8]
        s = v[:, 9]; r = v[:, 10]; g = v[:, 11]
        cai = x[:, 0]; casr = x[:, 1]; nai = x[:, 2]; ki = x[:, 3]
        n = u.shape[0]

        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            e_na = rtf * np.log(pr["na_o"] / nai)
            e_k = rtf * np.log(pr["k_o"] / ki)
            e_ks = rtf * np.log((pr["k_o"] + pr["p_kna"] * pr["na_o"])
                                / (ki + pr["p_kna"] * nai))
            e_ca = 0.5 * rtf * np.log(pr["ca_o"] / cai)

            vk = u - e_k
            ak1 = 0.1 / (1.0 + np.exp(0.06 * (vk - 200.0)))
            bk1 = (3.0 * np.exp(2e-4 * (vk + 100.0)) + np.exp(0.1 * (vk - 10.0))) \
                / (1.0 + np.exp(-0.5 * vk))
            sqrt_ko = np.sqrt(pr["k_o"] / 5.4)
            i_k1 = pr["g_k1"] * sqrt_ko * ak1 / (ak1 + bk1) * vk
            i_to = pr["g_to"] * r * s * vk
            i_kr = pr["g_kr"] * sqrt_ko * xr1 * xr2 * vk
            i_ks = pr["g_ks"] * xs * xs * (u - e_ks)
            i_na = pr["g_na"] * m ** 3 * h * j * (u - e_na)
            i_bna = pr["g_bna"] * (u - e_na)

            # L-type calcium current; singularity at V = 0 is removable
            gcal_f = pr["g_cal"] * 2.0 * pr["faraday"]
            z = (2.0 * frt) * u
            small = np.abs(u) < 1e-8
            zsafe = np.where(small, 1.0, z)
            ecaterm = cai * np.exp(z) - 0.341 * pr["ca_o"]
            dffca = d * f * fca
            i_cal = np.where(small, gcal_f * dffca * (cai - 0.341 * pr["ca_o"]),
                             gcal_f * dffca * zsafe * ecaterm / np.expm1(zsafe))

            i_bca = pr["g_bca"] * (u - e_ca)
            egf = np.exp(((pr["gamma_naca"] - 1.0) * frt) * u)
            naca_den = ((pr["km_nai"] ** 3 + pr["na_o"] ** 3)
                        * (pr["km_ca"] + pr["ca_o"]))
            i_naca = pr["k_naca"] * (np.exp((pr["gamma_naca"] * frt) * u)
                                     * (nai * nai * nai) * pr["ca_o"]
                                     - egf * (pr["na_o"] ** 3 * pr["alpha_naca"]) * cai) \
                / (naca_den * (1.0 + pr["k_sat"] * egf))
            i_nak = (pr["p_nak"] * pr["k_o"] / (pr["k_o"] + pr["k_mk"])) * nai \
                / ((nai + pr["k_mna"])
                   * (1.0 + 0.1245 * np.exp((-0.1 * frt) * u) + 0.0353 * np.exp(-frt * u)))
            i_pca = pr["g_pca"] * cai / (pr["k_pca"] + cai)
            i_pk = pr["g_pk"] * vk / (1.0 + np.exp((25.0 - u) / 5.98))

            iion = (i_k1 + i_to + i_kr + i_ks + i_cal + i_nak + i_na + i_bna
                    + i_naca + i_bca + i_pk + i_pca)

            # gate kinetics
            hot = u > -40.0  # upper branch of the h/j rate switches

            xr1_inf = 1.0 / (1.0 + np.exp((-26.0 - u) / 7.0))
            tau_xr1 = 450.0 / (1.0 + np.exp((-45.0 - u) / 10.0)) \
                * 6.0 / (1.0 + np.exp((u + 30.0) / 11.5))
            xr2_inf = 1.0 / (1.0 + np.exp((u + 88.0) / 24.0))
            tau_xr2 = 3.0 / (1.0 + np.exp((-60.0 - u) / 20.0)) \
                * 1.12 / (1.0 + np.exp((u - 60.0) / 20.0))
            xs_inf = 1.0 / (1.0 + np.exp((-5.0 - u) / 14.0))
            tau_xs = 1100.0 / np.sqrt(1.0 + np.exp((-10.0 - u) / 6.0)) \
                / (1.0 + np.exp((u - 60.0) / 20.0))
            tm_ = 1.0 / (1.0 + np.exp((-56.86 - u) / 9.03))
            m_inf = tm_ * tm_
            tau_m = 1.0 / (1.0 + np.exp((-60.0 - u) / 5.0)) \
                * (0.1 / (1.0 + np.exp((u + 35.0) / 5.0))
                   + 0.1 / (1.0 + np.exp((u - 50.0) / 200.0)))
            th_ = 1.0 / (1.0 + np.exp((u + 71.55) / 7.43))
            h_inf = th_ * th_
            a_h = np.where(hot, 0.0, 0.057 * np.exp(-(u + 80.0) / 6.8))
            b_h = np.where(hot,
                           0.77 / (0.13 * (1.0 + np.exp(-(u + 10.66) / 11.1))),
                           2.7 * np.exp(0.079 * u) + 3.1e5 * np.exp(0.3485 * u))
            tau_h = 1.0 / (a_h + b_h)
            j_inf = h_inf
            a_j = np.where(hot, 0.0,
                           (-2.5428e4 * np.exp(0.2444 * u) - 6.948e-6 * np.exp(-0.04391 * u))
                           * (u + 37.78) / (1.0 + np.exp(0.311 * (u + 79.23))))
            b_j = np.where(hot,
                           0.6 * np.exp(0.057 * u) / (1.0 + np.exp(-0.1 * (u + 32.0))),
                           0.02424 * np.exp(-0.01052 * u)
                           / (1.0 + np.exp(-0.1378 * (u + 40.14))))
            tau_j = 1.0 / (a_j + b_j)
            d_inf = 1.0 / (1.0 + np.exp((-5.0 - u) / 7.5))
            tau_d = (1.4 / (1.0 + np.exp((-35.0 - u) / 13.0)) + 0.25) \
                * 1.4 / (1.0 + np.exp((u + 5.0) / 5.0)) \
                + 1.0 / (1.0 + np.exp((50.0 - u) / 20.0))
            f_inf = 1.0 / (1.0 + np.exp((u + 20.0) / 7.0))
            uf = u + 27.0
            tau_f = 1125.0 * np.exp(uf * uf * (-1.0 / 240.0)) + 80.0 \
                + 165.0 / (1.0 + np.exp((25.0 - u) / 10.0))
            s_inf = 1.0 / (1.0 + np.exp((u + 20.0) / 5.0))
            us = u + 45.0
            tau_s = 85.0 * np.exp(us * us * (-1.0 / 320.0)) \
                + 5.0 / (1.0 + np.exp((u - 20.0) / 5.0)) + 3.0
            r_inf = 1.0 / (1.0 + np.exp((20.0 - u) / 6.0))
            ur = u + 40.0
            tau_r = 9.5 * np.exp(ur * ur * (-1.0 / 1800.0)) + 0.8

            rf = cai * (1.0 / 3.25e-4)
            rf2 = rf * rf; rf4 = rf2 * rf2
            fca_inf = (1.0 / (1.0 + rf4 * rf4)
                       + 0.1 / (1.0 + np.exp((cai - 5e-4) * 1e4))
                       + 0.2 / (1.0 + np.exp((cai - 7.5e-4) * (1.0 / 8e-4)))
                       + 0.23) * (1.0 / 1.46)
            rg = cai * (1.0 / 3.5e-4)
            rg2 = rg * rg; rg4 = rg2 * rg2; rg8 = rg4 * rg4
            g_inf = np.where(cai > 3.5e-4,
                             1.0 / (1.0 + rg8 * rg8),
                             1.0 / (1.0 + rg4 * rg2))
            # fCa and g may not increase while the cell is depolarized
            above = u > -60.0
            lock_fca = above & (fca_inf > fca)
            lock_g = above & (g_inf > g)

            a = np.empty((12, n))
            b = np.empty((12, n))
            for idx, (inf, tau) in enumerate((
                    (xr1_inf, tau_xr1), (xr2_inf, tau_xr2), (xs_inf, tau_xs),
                    (m_inf, tau_m), (h_inf, tau_h), (j_inf, tau_j),
                    (d_inf, tau_d), (f_inf, tau_f))):
                np.divide(-1.0, tau, out=a[idx])
                np.divide(inf, tau, out=b[idx])
            inv_tau_fca = 1.0 / pr["tau_fca"]
            a[8] = np.where(lock_fca, 0.0, -inv_tau_fca)
            b[8] = np.where(lock_fca, 0.0, fca_inf * inv_tau_fca)
            np.divide(-1.0, tau_s, out=a[9])
            np.divide(s_inf, tau_s, out=b[9])
            np.divide(-1.0, tau_r, out=a[10])
            np.divide(r_inf, tau_r, out=b[10])
            inv_tau_g = 1.0 / pr["tau_g"]
            a[11] = np.where(lock_g, 0.0, -inv_tau_g)
            b[11] = np.where(lock_g, 0.0, g_inf * inv_tau_g)

            # calcium subsystem and ion balances
            conc_fac = pr["cm"] / (pr["v_c"] * pr["faraday"])
            i_leak = pr["v_leak"] * (casr - cai)
            kup_cai = pr["k_up"] / cai
            i_up = pr["vmax_up"] / (1.0 + kup_cai * kup_cai)
            casr2 = casr * casr
            i_rel = (pr["a_rel"] * casr2 / (pr["b_rel"] ** 2 + casr2)
                     + pr["c_rel"]) * d * g
            cb = cai + pr["k_buf_c"]
            buf_c = 1.0 / (1.0 + pr["buf_c"] * pr["k_buf_c"] / (cb * cb))
            sb = casr + pr["k_buf_sr"]
            buf_sr = 1.0 / (1.0 + pr["buf_sr"] * pr["k_buf_sr"] / (sb * sb))

            dx = np.empty((4, n))
            dx[0] = buf_c * (i_leak - i_up + i_rel
                             - (i_cal + i_bca + i_pca - 2.0 * i_naca)
                             * (0.5 * conc_fac))
            dx[1] = (buf_sr * (pr["v_c"] / pr["v_sr"])) * (i_up - i_leak - i_rel)
            dx[2] = (i_na + i_bna + 3.0 * i_nak + 3.0 * i_naca) * (-conc_fac)
            dx[3] = (i_k1 + i_to + i_kr + i_ks + i_pk - 2.0 * i_nak) * (-conc_fac)
        return iion, a.T, b.T, dx.T
