import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from wavemomentum.spectral import FieldError, Grid1D, ModelParams, edge_magnitude


@pytest.fixture
def grid():
    return Grid1D(10.0, 64)


def smooth_random(grid, seed, modes=8):
    rng = np.random.default_rng(seed)
    f = np.zeros(grid.N)
    for m in range(1, modes + 1):
        a, b = rng.normal(size=2) / m**2
        f += a * np.cos(grid.k[m] * grid.x) + b * np.sin(grid.k[m] * grid.x)
    return f + rng.normal()


class TestGrid:
    def test_spacing_and_nodes(self, grid):
        assert grid.dx * grid.N == pytest.approx(grid.L, abs=0)
        assert grid.x[0] == 0.0
        assert grid.x[-1] == pytest.approx(grid.L - grid.dx)

    @pytest.mark.parametrize("n", [7, 6, 0, -8, 65])
    def test_rejects_bad_point_counts(self, n):
        with pytest.raises(ValueError):
            Grid1D(10.0, n)

    def test_rejects_nonpositive_length(self):
        with pytest.raises(ValueError):
            Grid1D(0.0, 16)

    def test_wavenumbers(self, grid):
        assert grid.k[1] == pytest.approx(2 * np.pi / grid.L)
        assert len(grid.k) == grid.N // 2 + 1
        assert grid.k_odd[-1] == 0.0

    def test_wrap_checks_shape(self, grid):
        with pytest.raises(FieldError):
            grid.wrap(np.zeros(grid.N + 1))

    def test_check_finite(self, grid):
        f = np.zeros(grid.N)
        f[3] = np.nan
        with pytest.raises(FieldError):
            grid.check_finite(f)


class TestModelParams:
    def test_valid(self):
        p = ModelParams(0.04, 0.04)
        assert p.eps == 0.04 and p.mu == 0.04

    @pytest.mark.parametrize("eps,mu", [(0.01, 0.3), (0.1, 0.04), (0.0, 0.04), (0.01, 0.0)])
    def test_regime_enforced(self, eps, mu):
        with pytest.raises(ValueError):
            ModelParams(eps, mu)

    def test_unchecked_allows_formal_limit(self):
        p = ModelParams.unchecked(0.0, 0.0)
        assert p.eps == 0.0


class TestDerivative:
    def test_constant(self, grid):
        assert np.abs(grid.derivative(np.full(grid.N, 3.7), 1)).max() < 1e-13

    def test_first_derivative_of_sine(self, grid):
        k = 2 * np.pi / grid.L
        d = grid.derivative(np.sin(k * grid.x), 1)
        assert np.abs(d - k * np.cos(k * grid.x)).max() < 1e-13

    def test_third_derivative(self, grid):
        k = 3 * 2 * np.pi / grid.L
        d = grid.derivative(np.sin(k * grid.x), 3)
        assert np.abs(d + k**3 * np.cos(k * grid.x)).max() < 1e-11

    @pytest.mark.parametrize("order", [2, 4])
    def test_even_orders(self, grid, order):
        k = 2 * 2 * np.pi / grid.L
        d = grid.derivative(np.cos(k * grid.x), order)
        assert np.abs(d - (-1) ** (order // 2) * k**order * np.cos(k * grid.x)).max() < 1e-10

    @pytest.mark.parametrize("order", [0, 5, -1])
    def test_rejects_order(self, grid, order):
        with pytest.raises(ValueError):
            grid.derivative(np.zeros(grid.N), order)

    def test_applies_along_first_axis_of_2d(self, grid):
        k = 2 * np.pi / grid.L
        f = np.sin(k * grid.x)[:, None] * np.array([1.0, 2.0])[None, :]
        d = grid.derivative(f, 1)
        assert np.abs(d[:, 1] - 2 * k * np.cos(k * grid.x)).max() < 1e-13


class TestAntiderivative:
    def test_cosine(self, grid):
        k = 2 * 2 * np.pi / grid.L
        F = grid.antiderivative(np.cos(k * grid.x))
        assert np.abs(F - np.sin(k * grid.x) / k).max() < 1e-13

    def test_zero(self, grid):
        assert np.all(grid.antiderivative(np.zeros(grid.N)) == 0.0)

    def test_rejects_nonzero_mean(self, grid):
        with pytest.raises(ValueError, match="nonzero mean"):
            grid.antiderivative(np.full(grid.N, 0.5))

    def test_inverts_derivative(self, grid):
        f = smooth_random(grid, 1)
        f -= f.mean()
        assert np.abs(grid.derivative(grid.antiderivative(f), 1) - f).max() < 1e-12


class TestDealias:
    def test_resolved_field_unchanged(self, grid):
        f = smooth_random(grid, 2, modes=10)
        assert np.abs(grid.dealias(f) - f).max() < 1e-14

    def test_nyquist_adjacent_mode_removed(self, grid):
        m = grid.N // 2 - 1
        f = np.cos(grid.k[m] * grid.x)
        assert np.abs(grid.dealias(f)).max() < 1e-13

    def test_idempotent_on_random_data(self, grid):
        f = np.random.default_rng(3).normal(size=grid.N)
        once = grid.dealias(f)
        assert np.abs(grid.dealias(once) - once).max() < 1e-14


class TestIntegralAndNorms:
    def test_constant(self):
        g = Grid1D(10.0, 32)
        assert g.integral(np.ones(g.N)) == pytest.approx(10.0, abs=1e-13)

    def test_full_period_sine(self, grid):
        assert abs(grid.integral(np.sin(2 * np.pi * grid.x / grid.L))) < 1e-14

    def test_localized_bump_matches_adaptive_quadrature(self):
        g = Grid1D(40.0, 256)
        f = lambda x: 0.7 / np.cosh(1.3 * (x - 17.0)) ** 2
        ref, _ = quad(f, 0.0, 40.0, epsabs=1e-13, epsrel=1e-13, limit=200)
        assert g.integral(f(g.x)) == pytest.approx(ref, abs=1e-10)

    def test_linf(self, grid):
        assert grid.norm_linf(np.zeros(grid.N)) == 0.0
        f = np.full(grid.N, 1.5)
        f[7] = -3.0
        assert grid.norm_linf(f) == 3.0

    def test_linf_of_sech2_peak(self):
        g = Grid1D(40.0, 400)
        f = 0.8 / np.cosh(0.9 * (g.x - 20.0)) ** 2
        assert g.norm_linf(f) == pytest.approx(0.8, abs=1e-12)

    def test_hs_mu_zero(self, grid):
        assert grid.norm_hs_mu(np.zeros(grid.N), 2.0, 0.1) == 0.0

    def test_hs_mu_collapses_to_l2(self, grid):
        f = smooth_random(grid, 4)
        assert grid.norm_hs_mu(f, 0.0, 0.0) == pytest.approx(grid.norm_l2(f), rel=1e-13)

    @pytest.mark.parametrize("s,mu", [(0.0, 0.0), (1.0, 0.05), (2.0, 0.2), (1.5, 0.01)])
    def test_hs_mu_single_mode(self, grid, s, mu):
        m = 3
        k = grid.k[m]
        # ||cos(kx)||^2 over one cell = L/2, weighted by (1+k^2)^s (1 + mu k^2)
        expected = np.sqrt(grid.L / 2 * (1 + k**2) ** s * (1 + mu * k**2))
        assert grid.norm_hs_mu(np.cos(k * grid.x), s, mu) == pytest.approx(expected, rel=1e-13)

    def test_hs_mu_rejects_negative_mu(self, grid):
        with pytest.raises(ValueError):
            grid.norm_hs_mu(np.ones(grid.N), 1.0, -0.1)

    def test_edge_magnitude(self):
        f = np.zeros(10)
        f[-1] = 2e-9
        f[5] = 1.0
        assert edge_magnitude(f) == 2e-9


seeds = st.integers(min_value=0, max_value=10_000)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_round_trip(seed):
    g = Grid1D(10.0, 64)
    f = np.random.default_rng(seed).normal(size=g.N)
    back = g.to_physical(g.to_spectral(f))
    assert np.linalg.norm(back - f) <= 1e-12 * np.linalg.norm(f)


@settings(max_examples=30, deadline=None)
@given(seeds, st.floats(-3, 3), st.floats(-3, 3))
def test_derivative_linear(seed, a, b):
    g = Grid1D(10.0, 64)
    f, h = smooth_random(g, seed), smooth_random(g, seed + 1)
    lhs = g.derivative(a * f + b * h, 1)
    rhs = a * g.derivative(f, 1) + b * g.derivative(h, 1)
    assert np.abs(lhs - rhs).max() < 1e-11


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_integral_of_derivative_vanishes(seed):
    g = Grid1D(10.0, 64)
    f = np.random.default_rng(seed).normal(size=g.N)
    assert abs(g.integral(g.derivative(f, 1))) < 1e-12


@settings(max_examples=30, deadline=None)
@given(seeds, st.floats(0.0, 3.0), st.floats(0.0, 0.25))
def test_hs_mu_splits_into_derivative_part(seed, s, mu):
    g = Grid1D(10.0, 64)
    f = np.random.default_rng(seed).normal(size=g.N)
    lhs = g.norm_hs_mu(f, s, mu) ** 2 - g.norm_hs_mu(f, s, 0.0) ** 2
    rhs = mu * g.norm_hs_mu(g.derivative(f, 1), s, 0.0) ** 2
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9 * g.norm_hs_mu(f, s, mu) ** 2)
