"""Ionic model contracts: equilibria, rate-split identity, numerical
Jacobians and switch handling."""

import numpy as np
import pytest

from monodt.cells import (CellModel, CellState, eval_reaction, get_model,
                          numerical_jacobian, rate_split)
from monodt.cells.base import jacobian_batch
from monodt.errors import NumericalOverflow
from monodt.kernels import dense_eigenvalues

MODELS = ("ms", "br", "tnnp")


class LinearDecayModel(CellModel):
    """du/dt = -3u, no gates or concentrations (Jacobian test fixture)."""

    name = "lin"
    p = 0
    q = 0
    default_params = {}
    _rest = (0.0,)
    _bounds = ((-10.0, 10.0),)

    def terms(self, u, v, x):
        n = u.shape[0]
        return 3.0 * u, np.empty((n, 0)), np.empty((n, 0)), np.empty((n, 0))


def rest_residual(model):
    du, dv, dx = eval_reaction(model, model.rest_state, 0.0)
    return max(abs(du), np.abs(dv).max() if dv.size else 0.0,
               np.abs(dx).max() if dx.size else 0.0)


def random_states(model, count, seed):
    rng = np.random.default_rng(seed)
    b = model.bounds
    rest = model.rest_state.pack()
    out = []
    for _ in range(count):
        mix = rng.uniform(0.0, 1.0, model.n_vars)
        lo = np.maximum(b[:, 0], rest - 2 * np.abs(rest) - 1.0)
        hi = np.minimum(b[:, 1], rest + 2 * np.abs(rest) + 1.0)
        y = lo + mix * (hi - lo)
        out.append(CellState.unpack(y, model.p, model.q))
    return out


class TestStructure:
    def test_variable_counts(self):
        assert get_model("ms").n_vars == 2
        br = get_model("br")
        assert (br.p, br.q, br.n_vars) == (6, 1, 8)
        tnnp = get_model("tnnp")
        assert (tnnp.p, tnnp.q, tnnp.n_vars) == (12, 4, 17)

    def test_parameter_override(self):
        m = get_model("br", g_na=5.0)
        assert m.params["g_na"] == 5.0
        with pytest.raises(KeyError):
            get_model("br", nonsense=1.0)


class TestEquilibria:
    @pytest.mark.parametrize("name", MODELS)
    def test_rest_is_quasi_equilibrium(self, name):
        model = get_model(name)
        tol = max(1e-6, 1.5 * model.equilibrium_residual)
        assert rest_residual(model) < tol

    def test_ms_rest_exact(self):
        assert rest_residual(get_model("ms")) == 0.0

    def test_br_rest_tight(self):
        assert rest_residual(get_model("br")) < 1e-9

    def test_br_reaction_under_stimulus(self):
        # at rest the net ionic current nearly vanishes, so dI = i_app/C_m
        model = get_model("br")
        du, _, _ = eval_reaction(model, model.rest_state, 50.0)
        assert du == pytest.approx(50.0 / model.membrane_capacity, abs=1e-6)


class TestRateSplit:
    @pytest.mark.parametrize("name", MODELS)
    def test_identity_dv_equals_av_plus_b(self, name):
        model = get_model(name)
        for state in random_states(model, 100, seed=hash(name) % 2**32):
            _, dv, _ = eval_reaction(model, state, 0.0)
            rs = rate_split(model, state.u, state)
            expect = rs.a * state.v + rs.b
            scale = np.maximum(np.abs(expect), 1e-3)
            assert (np.abs(dv - expect) / scale).max() < 1e-12

    @pytest.mark.parametrize("name", ("br", "tnnp"))
    def test_gate_steady_state_zeroes_rhs(self, name):
        model = get_model(name)
        for u in np.linspace(-90.0, 40.0, 27):
            rs = rate_split(model, float(u))
            vinf = rs.v_inf
            mask = rs.a != 0.0
            resid = rs.a[mask] * vinf[mask] + rs.b[mask]
            assert np.abs(resid).max() < 1e-12 * np.abs(rs.b[mask]).max()

    @pytest.mark.parametrize("name", ("br", "tnnp"))
    def test_rates_negative_and_bounded(self, name):
        # a_i(u) < 0 and v_inf in [0,1] for the voltage-gated channels
        model = get_model(name)
        skip = {"fca", "g"} if name == "tnnp" else set()
        cols = [i for i, g in enumerate(model.gate_names) if g not in skip]
        for u in np.linspace(-90.0, 40.0, 1000):
            rs = rate_split(model, float(u))
            assert (rs.a[cols] < 0.0).all()
            vinf = rs.v_inf[cols]
            assert (vinf >= -1e-12).all() and (vinf <= 1.0 + 1e-12).all()

    def test_ms_piecewise_pair(self):
        model = get_model("ms")
        pr = model.params
        below = rate_split(model, 0.05)
        assert below.a[0] == pytest.approx(-1.0 / pr["tau_open"])
        assert below.b[0] == pytest.approx(1.0 / pr["tau_open"])
        above = rate_split(model, 0.5)
        assert above.a[0] == pytest.approx(-1.0 / pr["tau_close"])
        assert above.b[0] == 0.0
        # exactly at the gate the lower branch applies
        at = rate_split(model, pr["u_gate"])
        assert at.a[0] == below.a[0] and at.b[0] == below.b[0]

    def test_tnnp_sided_values_near_switch_finite(self):
        model = get_model("tnnp")
        for u in (-40.0 - 1e-8, -40.0 + 1e-8):
            rs = rate_split(model, u)
            assert np.isfinite(rs.a).all() and np.isfinite(rs.b).all()


class TestJacobian:
    def test_linear_model(self):
        model = LinearDecayModel()
        state = CellState(u=0.7, v=np.empty(0), x=np.empty(0))
        jac = numerical_jacobian(model, state)
        assert jac.shape == (1, 1)
        assert jac[0, 0] == pytest.approx(-3.0, abs=1e-6)

    def test_step_halving_second_order(self):
        # halving the relative step changes smooth-model entries by O(eps^2)
        model = get_model("br")
        rng = np.random.default_rng(4)
        for state in random_states(model, 10, seed=9):
            j1 = numerical_jacobian(model, state, eps_rel=1e-5)
            j2 = numerical_jacobian(model, state, eps_rel=5e-6)
            j3 = numerical_jacobian(model, state, eps_rel=2.5e-6)
            d12 = np.abs(j1 - j2).max()
            d23 = np.abs(j2 - j3).max()
            scale = np.abs(j1).max()
            # each refinement shrinks the difference roughly fourfold
            assert d23 < 0.6 * d12 + 1e-9 * scale

    def test_br_rest_eigenvalue(self):
        model = get_model("br")
        jac = numerical_jacobian(model, model.rest_state)
        spec = dense_eigenvalues(jac)
        assert spec.lambda_min == pytest.approx(-81.782, rel=0.002)

    def test_switch_shift_keeps_entries_bounded(self):
        # differencing at the MS gate must not produce the huge spurious
        # entries a stencil straddling the branch jump would give
        model = get_model("ms")
        for u in (model.params["u_gate"], model.params["u_gate"] + 1e-9):
            state = CellState(u=u, v=np.array([0.8]), x=np.empty(0))
            jac = numerical_jacobian(model, state)
            assert np.abs(jac).max() < 50.0

    def test_batch_matches_single(self):
        model = get_model("tnnp")
        states = random_states(model, 5, seed=21)
        u = np.array([s.u for s in states])
        v = np.stack([s.v for s in states])
        x = np.stack([s.x for s in states])
        jb = jacobian_batch(model, u, v, x)
        for i, s in enumerate(states):
            ji = numerical_jacobian(model, s)
            assert np.abs(jb[i] - ji).max() <= 1e-9 * max(np.abs(ji).max(), 1.0)


class TestOverflowSignal:
    def test_non_finite_output_raises_with_index(self):
        model = get_model("br")
        bad = CellState(u=-84.0, v=np.full(6, 0.5), x=np.array([-1.0e-7]))
        with pytest.raises(NumericalOverflow) as err:
            eval_reaction(model, bad, 0.0)  # log of negative calcium
        assert err.value.variable_index is not None
