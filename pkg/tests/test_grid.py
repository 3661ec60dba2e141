"""Grid, Neumann Laplacian and stimulation-current behavior."""

import numpy as np
import pytest

from monodt.errors import ConfigError, DimensionError
from monodt.grid import (DiffusionSpec, Grid1D, Stimulus1D, laplacian_apply,
                         laplacian_dense, stimulus_at)
from monodt.kernels import dense_eigenvalues


class TestGrid:
    def test_spacing(self):
        g = Grid1D(100.0, 1600)
        assert g.h == pytest.approx(0.0625)
        assert g.n_nodes == 1601
        assert g.x[0] == 0.0 and g.x[-1] == 100.0

    def test_odd_intervals_rejected(self):
        with pytest.raises(ConfigError):
            Grid1D(10.0, 5)

    def test_node_lookup(self):
        g = Grid1D(100.0, 100)
        assert g.node_at(20.0) == 20
        with pytest.raises(ConfigError):
            g.node_at(120.0)


class TestLaplacian:
    def test_constant_in_nullspace(self):
        g = Grid1D(10.0, 16)
        out = laplacian_apply(g, 1.3, np.full(g.n_nodes, 7.0))
        assert np.abs(out).max() == 0.0

    def test_three_node_stencil_with_mirror_ghosts(self):
        g = Grid1D(2.0, 2)  # h = 1
        out = laplacian_apply(g, 1.0, np.array([0.0, 1.0, 0.0]))
        assert out == pytest.approx([2.0, -2.0, 2.0])

    def test_cosine_eigenfunction_second_order(self):
        sigma, L = 0.7, 10.0
        errs = []
        for n in (64, 128):
            g = Grid1D(L, n)
            u = np.cos(np.pi * g.x / L)
            lap = laplacian_apply(g, sigma, u)
            errs.append(np.abs(lap + sigma * (np.pi / L) ** 2 * u).max())
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)

    def test_linearity(self):
        rng = np.random.default_rng(2)
        g = Grid1D(5.0, 32)
        u, w = rng.standard_normal((2, g.n_nodes))
        a, b = 1.7, -0.4
        lhs = laplacian_apply(g, 2.0, a * u + b * w)
        rhs = a * laplacian_apply(g, 2.0, u) + b * laplacian_apply(g, 2.0, w)
        assert np.abs(lhs - rhs).max() < 1e-12 * max(np.abs(rhs).max(), 1.0)

    def test_row_sums_exactly_zero(self):
        g = Grid1D(3.0, 12)
        a = laplacian_dense(g, 0.9)
        assert np.abs(a.sum(axis=1)).max() == 0.0

    def test_spectrum_real_nonpositive(self):
        for n in (8, 16, 32):
            g = Grid1D(4.0, n)
            a = laplacian_dense(g, 1.1)
            spec = dense_eigenvalues(a)
            assert np.abs(spec.values.imag).max() < 1e-8
            assert spec.values.real.max() < 1e-10

    def test_size_mismatch(self):
        g = Grid1D(1.0, 4)
        with pytest.raises(DimensionError):
            laplacian_apply(g, 1.0, np.zeros(7))


class TestDiffusionSpec:
    def test_direct(self):
        assert DiffusionSpec(0.024085).sigma == 0.024085

    def test_derived(self):
        spec = DiffusionSpec.from_tissue(anisotropy_ratio=1.0, sigma_i=3.0,
                                         chi=1000.0, membrane_capacity=1.0)
        assert spec.sigma == pytest.approx(0.0015)

    def test_nonpositive_rejected(self):
        with pytest.raises(ConfigError):
            DiffusionSpec(0.0)


class TestStimulus:
    def test_peak_value(self):
        stim = Stimulus1D()
        assert stimulus_at(stim, 0.5, 1.5) == pytest.approx(50.0)

    def test_outside_spatial_support(self):
        stim = Stimulus1D()
        assert stimulus_at(stim, 2.0, 1.0) == 0.0
        assert stimulus_at(stim, 0.3, 5.0) == 0.0

    def test_quoted_formula_point(self):
        # both bump arguments hit 1 - 1/(1 - 1/4) = 1 - 4/3
        stim = Stimulus1D()
        expected = 50.0 * np.exp(1.0 - 4.0 / 3.0) ** 2
        assert stimulus_at(stim, 0.75, 2.0) == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(25.67, abs=0.005)

    def test_boundary_evaluation_is_finite_zero(self):
        stim = Stimulus1D()
        for x, t in ((0.0, 1.5), (1.0, 1.5), (0.5, 0.5), (0.5, 2.5)):
            val = stimulus_at(stim, x, t)
            assert val == 0.0
        eps = 1e-9
        assert stimulus_at(stim, 1.0 - eps, 1.5) >= 0.0
        assert np.isfinite(stimulus_at(stim, 1.0 - eps, 1.5))

    def test_smooth_at_support_edge(self):
        # one-sided limit of the bump value at the support boundary is 0
        stim = Stimulus1D()
        vals = [stimulus_at(stim, x, 1.5) for x in (0.99, 0.995, 0.999)]
        assert vals[0] > vals[1] > vals[2] >= 0.0
        assert vals[2] < 1e-60

    def test_invalid_support(self):
        with pytest.raises(ConfigError):
            Stimulus1D(x_start=1.0, x_end=0.5)
