import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wavemomentum import waterwave as ww
from wavemomentum.spectral import Grid1D, ModelParams
from wavemomentum.waterwave import VerticalGrid, WaterWaveState, ZCSModel

P = ModelParams(0.08, 0.08)
VG = VerticalGrid(24)


def bump(grid, amp=1.0, width=2.0):
    return amp * np.exp(-(((grid.x - grid.L / 2) / width) ** 2))


class TestVerticalGrid:
    def test_nodes_ascending_on_unit_interval(self):
        s = VG.sigma
        assert s[0] == pytest.approx(0.0, abs=1e-15) and s[-1] == pytest.approx(1.0, abs=1e-15)
        assert np.all(np.diff(s) > 0)

    @pytest.mark.parametrize("n", [0, 1, 5, 12, 23])
    def test_quadrature_exact_for_polynomials(self, n):
        assert VG.weights @ VG.sigma**n == pytest.approx(1.0 / (n + 1), abs=1e-14)

    def test_differentiation_exact_for_polynomials(self):
        s = VG.sigma
        assert np.abs(VG.D1 @ s**7 - 7 * s**6).max() < 1e-11
        assert np.abs(VG.D2 @ s**5 - 20 * s**3).max() < 1e-9

    def test_rejects_tiny_grid(self):
        with pytest.raises(ValueError):
            VerticalGrid(1)


class TestFlatDNO:
    grid = Grid1D(80.0, 256)

    def test_constant_trace(self):
        pf = ww.solve_potential(np.zeros(self.grid.N), np.full(self.grid.N, 2.5), P, VG, self.grid)
        assert np.abs(pf.psi - 2.5).max() < 1e-12
        assert np.abs(ww.dno_from_potential(pf)).max() < 1e-12

    @pytest.mark.parametrize("mu", [0.01, 0.04, 0.08])
    @pytest.mark.parametrize("m", [1, 4, 10, 20, 40])
    def test_single_mode(self, mu, m):
        p = ModelParams(mu, mu)
        k = self.grid.k[m]
        G = ww.dirichlet_neumann(np.zeros(self.grid.N), np.cos(k * self.grid.x), p, VG, self.grid)
        sk = np.sqrt(mu) * k
        assert np.abs(G - sk * np.tanh(sk) * np.cos(k * self.grid.x)).max() <= 1e-9

    def test_potential_matches_cosh_profile(self):
        k = self.grid.k[6]
        pf = ww.solve_potential(np.zeros(self.grid.N), np.cos(k * self.grid.x), P, VG, self.grid)
        sk = np.sqrt(P.mu) * k
        exact = np.cos(k * self.grid.x)[:, None] * np.cosh(sk * VG.sigma)[None, :] / np.cosh(sk)
        assert np.abs(pf.psi - exact).max() <= 1e-9

    def test_vertical_refinement_converged(self):
        phi = bump(self.grid, 0.5, 3.0)
        zeta = bump(self.grid)
        a = ww.dirichlet_neumann(zeta, phi, P, VerticalGrid(24), self.grid)
        b = ww.dirichlet_neumann(zeta, phi, P, VerticalGrid(48), self.grid)
        assert np.abs(a - b).max() <= 1e-10


class TestCurvedSurface:
    """Exact harmonic ``cos(kx) cosh(sqrt(mu) k (z+1))`` restricted to a bumped domain."""

    grid = Grid1D(80.0, 512)

    @pytest.mark.parametrize("m", [3, 10, 30])
    def test_dno_and_momentum(self, m):
        g, p = self.grid, P
        sk = np.sqrt(p.mu) * g.k[m]
        k = g.k[m]
        zeta = bump(g)
        h = 1 + p.eps * zeta
        phi = np.cos(k * g.x) * np.cosh(sk * h)
        pf = ww.solve_potential(zeta, phi, p, VG, g)
        assert pf.residual() <= ww.RESIDUAL_TOL
        zx = g.derivative(zeta, 1)
        G = p.eps * p.mu * zx * k * np.sin(k * g.x) * np.cosh(sk * h) + sk * np.cos(k * g.x) * np.sinh(sk * h)
        M = -np.sin(k * g.x) * np.sinh(sk * h) / np.sqrt(p.mu)
        assert np.abs(ww.dno_from_potential(pf) - G).max() <= 1e-9
        assert np.abs(ww.momentum_density_exact(pf) - M).max() <= 1e-9


def test_dno_is_symmetric():
    g = Grid1D(80.0, 256)
    zeta = bump(g)
    a, b = bump(g, 0.4, 3.0) * np.sin(g.x / 2), bump(g, 0.7, 2.5)
    lhs = g.integral(a * ww.dirichlet_neumann(zeta, b, P, VG, g))
    rhs = g.integral(b * ww.dirichlet_neumann(zeta, a, P, VG, g))
    assert abs(lhs - rhs) <= 1e-8


def test_dense_and_iterative_agree():
    g = Grid1D(40.0, 32)
    vg = VerticalGrid(8)
    zeta = bump(g, 1.0, 3.0)
    phi = bump(g, 0.5, 4.0)
    a = ww.solve_potential(zeta, phi, P, vg, g, strategy="gmres")
    b = ww.solve_potential(zeta, phi, P, vg, g, strategy="dense")
    assert np.abs(a.psi - b.psi).max() < 1e-10


def test_unknown_strategy():
    with pytest.raises(ValueError):
        ww.PotentialSolver(Grid1D(40.0, 32), VerticalGrid(8), P, strategy="magic")


def test_momentum_is_depth_times_average():
    g = Grid1D(80.0, 256)
    pf = ww.solve_potential(bump(g), bump(g, 0.5, 3.0), P, VG, g)
    assert np.abs(ww.momentum_density_exact(pf) - pf.depth * ww.averaged_velocity(pf)).max() < 1e-14


def test_uniform_stream_from_mean_slope():
    g = Grid1D(80.0, 256)
    zeta = bump(g)
    pf = ww.solve_potential(zeta, np.zeros(g.N), P, VG, g, mean_slope=0.3)
    assert np.abs(pf.dx_phi() - 0.3).max() < 1e-10
    assert np.abs(ww.averaged_velocity(pf) - 0.3).max() < 1e-10


def test_linear_dispersion_relation():
    g = Grid1D(80.0, 256)
    model = ZCSModel(g, VG, P)
    delta = 1e-5
    for m in (2, 8, 25):
        k = g.k[m]
        c = np.cos(k * g.x)
        _, phi_t = model.rhs(WaterWaveState(delta * c, np.zeros(g.N)))
        zeta_tt, _ = model.rhs(WaterWaveState(np.zeros(g.N), phi_t))
        omega2 = k * np.tanh(np.sqrt(P.mu) * k) / np.sqrt(P.mu)
        assert np.abs(zeta_tt / delta + omega2 * c).max() <= 1e-4 * omega2


def test_flux_and_trace_forms_agree():
    g = Grid1D(80.0, 256)
    s = WaterWaveState(bump(g), bump(g, 0.5, 3.0))
    a = ZCSModel(g, VG, P, flux_form=True).rhs(s)[0]
    b = ZCSModel(g, VG, P, flux_form=False).rhs(s)[0]
    assert np.abs(a - b).max() < 1e-8


class TestTimeStepping:
    grid = Grid1D(80.0, 256)

    def initial(self):
        return WaterWaveState(bump(self.grid), 0.5 * bump(self.grid, 1.0, 3.0) * np.sin(self.grid.x / 4))

    def test_mass_and_energy(self):
        model = ZCSModel(self.grid, VG, P)
        s0 = self.initial()
        e0 = ww.energy(s0, model.potential(s0))
        s1 = model.step(s0, 0.01, 200)
        e1 = ww.energy(s1, model.potential(s1))
        assert abs(self.grid.integral(s1.zeta) - self.grid.integral(s0.zeta)) <= 1e-9 * abs(self.grid.integral(s0.zeta))
        assert abs(e1 - e0) <= 1e-7 * abs(e0)

    def test_rk4_order(self):
        model = ZCSModel(self.grid, VG, P)
        s0 = self.initial()
        ref = model.step(s0, 0.0125, 40).zeta
        errs = [np.abs(model.step(s0, dt, n).zeta - ref).max() for dt, n in ((0.25, 2), (0.125, 4))]
        assert 12.0 < errs[0] / errs[1] < 20.0

    def test_rejects_bad_dt(self):
        with pytest.raises(ValueError):
            ZCSModel(self.grid, VG, P).step(self.initial(), 0.0)

    def test_collapsed_depth(self):
        zeta = np.full(self.grid.N, -1.5 / P.eps)
        with pytest.raises(ww.DegenerateDepthError):
            ww.solve_potential(zeta, np.sin(self.grid.x), P, VG, self.grid)


@settings(max_examples=8, deadline=None)
@given(st.floats(-0.5, 0.5), st.floats(0.1, 1.0))
def test_dno_annihilates_constants(c, amp):
    g = Grid1D(80.0, 128)
    G = ww.dirichlet_neumann(bump(g, amp), np.full(g.N, c), P, VerticalGrid(16), g)
    assert np.abs(G).max() < 1e-11


@settings(max_examples=8, deadline=None)
@given(st.floats(0.1, 1.0), st.integers(0, 1000))
def test_dno_is_nonnegative(amp, seed):
    g = Grid1D(80.0, 128)
    rng = np.random.default_rng(seed)
    phi = bump(g, rng.normal(), rng.uniform(2, 5)) + bump(g, rng.normal(), 1.5)
    G = ww.dirichlet_neumann(bump(g, amp), phi, P, VerticalGrid(16), g)
    assert g.integral(phi * G) >= -1e-12
