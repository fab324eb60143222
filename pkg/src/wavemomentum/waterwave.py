"""
Reference water-wave solver in Zakharov-Craig-Sulem form.

The velocity potential solves ``mu phi_xx + phi_zz = 0`` in
``-1 < z < eps*zeta(x)`` with ``phi_z = 0`` on the bottom and ``phi = Phi``
on the surface.  The fluid column is flattened with

    z = -1 + sigma * h(x),    h = 1 + eps*zeta,    0 <= sigma <= 1,

and discretized by Fourier collocation in x and Chebyshev-Gauss-Lobatto
collocation in sigma.  In the mapped variables the equation reads

    mu h^2 (d_x - sigma a d_sigma)^2 psi + psi_sigma_sigma = 0,   a = h_x / h.

The coupled system is solved with GMRES, right-preconditioned by the exact
flat-strip solver (one small dense solve per Fourier mode).

Surface potentials may carry a uniform gradient ``mean_slope``: the full trace
is ``Phi(x) = phi_s(x) + mean_slope * x`` with ``phi_s`` periodic.  The linear
part is an exact harmonic function with zero bottom flux, so only ``phi_s``
enters the elliptic solve.  This lets a localized velocity with nonzero
integral live on the periodic cell.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .kdv import BLOWUP_GUARD, BlowUpError
from .spectral import Grid1D, ModelParams

log = logging.getLogger(__name__)

ELLIPTIC_RTOL = 1e-11
RESIDUAL_TOL = 1e-9


def elliptic_rtol(nz: int) -> float:
    """GMRES stopping tolerance; rounding in the sigma-collocation rows grows like ``Nz**4``."""
    return max(ELLIPTIC_RTOL, 0.1 * np.finfo(float).eps * nz**4)


class EllipticSolveError(RuntimeError):
    pass


class DegenerateDepthError(RuntimeError):
    pass


@dataclass(frozen=True)
class VerticalGrid:
    """Chebyshev-Gauss-Lobatto nodes on ``[0, 1]``, ascending, with
    Clenshaw-Curtis weights and collocation derivative matrices."""

    num_points: int = 24

    def __post_init__(self):
        if self.num_points < 3:
            raise ValueError(f"need at least 3 vertical points, got {self.num_points}")

    @property
    def Nz(self) -> int:
        return self.num_points

    @cached_property
    def sigma(self) -> np.ndarray:
        n = self.num_points - 1
        return 0.5 * (1.0 - np.cos(np.pi * np.arange(n + 1) / n))

    @cached_property
    def weights(self) -> np.ndarray:
        return 0.5 * clenshaw_curtis_weights(self.num_points - 1)

    @cached_property
    def D1(self) -> np.ndarray:
        return barycentric_diff_matrix(self.sigma, cgl_barycentric_weights(self.num_points - 1))

    @cached_property
    def D2(self) -> np.ndarray:
        return self.D1 @ self.D1


def clenshaw_curtis_weights(n: int) -> np.ndarray:
    """Weights on ``[-1, 1]`` for the nodes ``cos(pi j / n)``, ``j = 0..n``."""
    theta = np.pi * np.arange(n + 1) / n
    w = np.zeros(n + 1)
    inner = np.arange(1, n)
    v = np.ones(n - 1)
    if n % 2 == 0:
        w[0] = w[n] = 1.0 / (n**2 - 1)
        for k in range(1, n // 2):
            v -= 2.0 * np.cos(2 * k * theta[inner]) / (4 * k**2 - 1)
        v -= np.cos(n * theta[inner]) / (n**2 - 1)
    else:
        w[0] = w[n] = 1.0 / n**2
        for k in range(1, (n - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * theta[inner]) / (4 * k**2 - 1)
    w[inner] = 2.0 * v / n
    return w


def cgl_barycentric_weights(n: int) -> np.ndarray:
    c = (-1.0) ** np.arange(n + 1)
    c[0] *= 0.5
    c[-1] *= 0.5
    return c


def barycentric_diff_matrix(nodes: np.ndarray, bary: np.ndarray) -> np.ndarray:
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    D = (bary[None, :] / bary[:, None]) / diff
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    return D


@dataclass(frozen=True)
class WaterWaveState:
    zeta: np.ndarray
    phi_s: np.ndarray
    t: float = 0.0
    mean_slope: float = 0.0

    def surface_velocity(self, grid: Grid1D) -> np.ndarray:
        return grid.derivative(self.phi_s, 1) + self.mean_slope


@dataclass
class PotentialField:
    """Potential ``psi(x_j, sigma_i)`` on the mapped grid plus the geometry it was solved on."""

    psi: np.ndarray
    zeta: np.ndarray
    mean_slope: float
    grid: Grid1D
    vgrid: VerticalGrid
    params: ModelParams
    iterations: int = 0

    @cached_property
    def depth(self) -> np.ndarray:
        return 1.0 + self.params.eps * self.zeta

    @cached_property
    def slope_ratio(self) -> np.ndarray:
        # a = h_x / h
        return self.params.eps * self.grid.derivative(self.zeta, 1) / self.depth

    @cached_property
    def psi_sigma(self) -> np.ndarray:
        return self.psi @ self.vgrid.D1.T

    def dx_phi(self) -> np.ndarray:
        """True horizontal derivative ``phi_x`` at fixed z on every node."""
        sigma = self.vgrid.sigma[None, :]
        return (
            self.grid.derivative(self.psi, 1)
            - sigma * self.slope_ratio[:, None] * self.psi_sigma
            + self.mean_slope
        )

    def dz_phi(self) -> np.ndarray:
        return self.psi_sigma / self.depth[:, None]

    def values(self, x_linear: bool = True) -> np.ndarray:
        """``phi`` on the grid, including the uniform-gradient part when requested."""
        if x_linear and self.mean_slope:
            return self.psi + self.mean_slope * self.grid.x[:, None]
        return self.psi

    def z_coordinates(self) -> np.ndarray:
        return -1.0 + self.vgrid.sigma[None, :] * self.depth[:, None]

    def residual(self) -> float:
        """Max-norm residual of the collocation equations (interior and bottom rows)."""
        lap = _mapped_operator(self.psi, self.grid, self.vgrid, self.params, self.depth, self.slope_ratio)
        interior = lap[:, 1:-1]
        bottom = self.psi_sigma[:, 0]
        return float(max(np.max(np.abs(interior)), np.max(np.abs(bottom))))

    def vertical_integral(self, values: np.ndarray) -> np.ndarray:
        """``int_{-1}^{eps zeta} f dz`` for nodal values ``f(x_j, sigma_i)``."""
        return self.depth * (values @ self.vgrid.weights)


def _mapped_operator(psi, grid, vgrid, p, depth, a, a_x=None):
    """``mu h^2 (d_x - sigma a d_sigma)^2 psi + psi_sigma_sigma`` on every node."""
    sigma = vgrid.sigma[None, :]
    if a_x is None:
        a_x = grid.derivative(a, 1)
    psi_hat = np.fft.rfft(psi, axis=0)
    px = np.fft.irfft(1j * grid.k_odd[:, None] * psi_hat, n=grid.N, axis=0)
    pxx = np.fft.irfft(-(grid.k**2)[:, None] * psi_hat, n=grid.N, axis=0)
    ps = psi @ vgrid.D1.T
    pss = psi @ vgrid.D2.T
    pxs = px @ vgrid.D1.T
    a = a[:, None]
    a_x = a_x[:, None]
    dxx = pxx - 2.0 * sigma * a * pxs + sigma * (a * a - a_x) * ps + sigma**2 * a * a * pss
    return p.mu * (depth**2)[:, None] * dxx + pss


class PotentialSolver:
    """Elliptic workspace for one ``(grid, vgrid, params)`` triple.

    ``strategy`` is ``"gmres"`` (default) or ``"dense"``; the dense path
    assembles the full collocation matrix and is only meant for small grids.
    A single instance must not be shared between threads.
    """

    def __init__(self, grid: Grid1D, vgrid: VerticalGrid, p: ModelParams, strategy: str = "gmres",
                 rtol: float | None = None, maxiter: int = 200):
        if strategy not in ("gmres", "dense"):
            raise ValueError(f"unknown elliptic strategy {strategy!r}")
        self.grid = grid
        self.vgrid = vgrid
        self.params = p
        self.strategy = strategy
        self.rtol = elliptic_rtol(vgrid.Nz) if rtol is None else rtol
        self.maxiter = maxiter
        nz = vgrid.Nz - 1
        D1, D2 = vgrid.D1, vgrid.D2
        # rows: bottom Neumann row, then interior collocation rows; columns exclude the surface node
        self._rows_sigma = np.vstack([D1[:1, :nz], D2[1:-1, :nz]])
        self._interior = np.zeros((nz, nz))
        self._interior[1:, :] = np.eye(vgrid.Nz)[1:-1, :nz]
        self._pre_cache: tuple[float, np.ndarray] | None = None

    def _preconditioner(self, hbar2: float) -> np.ndarray:
        # only the flat-strip reference depth; coarse rounding keeps it cached across a run
        hbar2 = round(hbar2, 3)
        if self._pre_cache is not None and self._pre_cache[0] == hbar2:
            return self._pre_cache[1]
        k2 = self.grid.k**2
        blocks = self._rows_sigma[None, :, :] - (self.params.mu * hbar2 * k2)[:, None, None] * self._interior[None]
        inv = np.linalg.inv(blocks)
        self._pre_cache = (hbar2, inv)
        return inv

    def _apply(self, w, depth, a, a_x):
        N, nz = self.grid.N, self.vgrid.Nz - 1
        psi = np.zeros((N, nz + 1))
        psi[:, :nz] = w.reshape(N, nz)
        lap = _mapped_operator(psi, self.grid, self.vgrid, self.params, depth, a, a_x)
        out = np.empty((N, nz))
        out[:, 0] = psi @ self.vgrid.D1[0]
        out[:, 1:] = lap[:, 1:-1]
        return out

    def solve(self, zeta: np.ndarray, phi_s: np.ndarray, mean_slope: float = 0.0) -> PotentialField:
        grid, vgrid, p = self.grid, self.vgrid, self.params
        depth = 1.0 + p.eps * zeta
        if not float(np.min(depth)) > 0.0:
            raise DegenerateDepthError(f"non-positive depth 1 + eps*min(zeta) = {np.min(depth):.3g}")
        a = p.eps * grid.derivative(zeta, 1) / depth
        N, nz = grid.N, vgrid.Nz - 1

        # lift psi = phi_s (constant in sigma) + w with w = 0 on the surface
        rhs = np.zeros((N, nz))
        rhs[:, 1:] = -(p.mu * depth**2 * grid.derivative(phi_s, 2))[:, None]

        iterations = 0
        if not np.any(rhs):
            w = np.zeros((N, nz))
        elif self.strategy == "dense":
            w = self._dense_solve(rhs, depth, a)
        else:
            w, iterations = self._gmres_solve(rhs, depth, a)

        psi = np.empty((N, nz + 1))
        psi[:, :nz] = w + phi_s[:, None]
        psi[:, nz] = phi_s
        return PotentialField(psi=psi, zeta=np.array(zeta, dtype=float), mean_slope=float(mean_slope),
                              grid=grid, vgrid=vgrid, params=p, iterations=iterations)

    def _gmres_solve(self, rhs, depth, a):
        grid = self.grid
        N, nz = grid.N, self.vgrid.Nz - 1
        inv = self._preconditioner(float(np.mean(depth**2)))
        a_x = grid.derivative(a, 1)

        def precondition(r):
            r_hat = np.fft.rfft(r.reshape(N, nz), axis=0)
            # real blocks act on real and imaginary parts separately
            w_hat = (inv @ r_hat.view(float).reshape(-1, nz, 2)).reshape(-1, 2 * nz).view(complex)
            return np.fft.irfft(w_hat, n=N, axis=0)

        def matvec(y):
            return self._apply(precondition(y), depth, a, a_x).ravel()

        op = LinearOperator((N * nz, N * nz), matvec=matvec, dtype=float)
        b = rhs.ravel()
        count = [0]

        def callback(_):
            count[0] += 1

        y, info = gmres(op, b, rtol=self.rtol, atol=0.0, restart=60, maxiter=self.maxiter,
                        callback=callback, callback_type="pr_norm")
        if info != 0:
            raise EllipticSolveError(f"GMRES did not converge (info={info})")
        return precondition(y), count[0]

    def _dense_solve(self, rhs, depth, a):
        N, nz = self.grid.N, self.vgrid.Nz - 1
        n = N * nz
        a_x = self.grid.derivative(a, 1)
        A = np.empty((n, n))
        e = np.zeros(n)
        for j in range(n):
            e[j] = 1.0
            A[:, j] = self._apply(e, depth, a, a_x).ravel()
            e[j] = 0.0
        return np.linalg.solve(A, rhs.ravel()).reshape(N, nz)


@lru_cache(maxsize=16)
def _cached_solver(grid, vgrid, p, strategy):
    return PotentialSolver(grid, vgrid, p, strategy=strategy)


def solve_potential(zeta, phi_s, p: ModelParams, vg: VerticalGrid, grid: Grid1D,
                    mean_slope: float = 0.0, strategy: str = "gmres") -> PotentialField:
    return _cached_solver(grid, vg, p, strategy).solve(np.asarray(zeta, float), np.asarray(phi_s, float), mean_slope)


def dno_from_potential(pf: PotentialField) -> np.ndarray:
    """``G(eps zeta) Phi = -eps mu zeta_x phi_x + phi_z`` evaluated at the surface."""
    p, grid = pf.params, pf.grid
    zeta_x = grid.derivative(pf.zeta, 1)
    surf_x = grid.derivative(pf.psi[:, -1], 1) + pf.mean_slope
    psi_sig = pf.psi_sigma[:, -1]
    return -p.eps * p.mu * zeta_x * surf_x + psi_sig * (1.0 + p.eps**2 * p.mu * zeta_x**2) / pf.depth


def dirichlet_neumann(zeta, phi_s, p: ModelParams, vg: VerticalGrid, grid: Grid1D,
                      mean_slope: float = 0.0) -> np.ndarray:
    return dno_from_potential(solve_potential(zeta, phi_s, p, vg, grid, mean_slope))


def momentum_density_exact(pf: PotentialField) -> np.ndarray:
    """Depth-integrated horizontal velocity ``int_{-1}^{eps zeta} phi_x dz``."""
    return pf.vertical_integral(pf.dx_phi())


def averaged_velocity(pf: PotentialField) -> np.ndarray:
    return momentum_density_exact(pf) / pf.depth


def energy(state: WaterWaveState, pf: PotentialField) -> float:
    """``1/2 int zeta^2 + 1/(2 mu) int int (mu phi_x^2 + phi_z^2) dz dx``."""
    p, grid = pf.params, pf.grid
    kinetic = pf.vertical_integral(p.mu * pf.dx_phi() ** 2 + pf.dz_phi() ** 2)
    return 0.5 * grid.integral(state.zeta**2) + 0.5 / p.mu * grid.integral(kinetic)


class ZCSModel:
    """Right-hand side and RK4 stepping of the ZCS equations.

    ``zeta_t = G Phi / mu`` is evaluated in the equivalent flux form
    ``zeta_t = -d_x int phi_x dz`` so that the discrete mass is conserved to
    round-off (``flux_form=False`` uses the surface traces instead).
    """

    def __init__(self, grid: Grid1D, vgrid: VerticalGrid, p: ModelParams, strategy: str = "gmres",
                 flux_form: bool = True):
        self.grid = grid
        self.vgrid = vgrid
        self.params = p
        self.solver = PotentialSolver(grid, vgrid, p, strategy=strategy)
        self.flux_form = flux_form
        self.last_potential: PotentialField | None = None

    def potential(self, state: WaterWaveState) -> PotentialField:
        return self.solver.solve(state.zeta, state.phi_s, state.mean_slope)

    def rhs(self, state: WaterWaveState):
        grid, p = self.grid, self.params
        pf = self.potential(state)
        self.last_potential = pf
        zeta_x = grid.derivative(state.zeta, 1)
        phi_x = grid.derivative(state.phi_s, 1) + state.mean_slope
        psi_sig = pf.psi_sigma[:, -1]
        if self.flux_form:
            zeta_t = -grid.derivative(momentum_density_exact(pf), 1)
        else:
            zeta_t = dno_from_potential(pf) / p.mu
        phi_t = (
            -state.zeta
            - 0.5 * p.eps * phi_x**2
            + 0.5 * p.eps / p.mu * psi_sig**2 * (1.0 + p.eps**2 * p.mu * zeta_x**2) / pf.depth**2
        )
        return grid.dealias(zeta_t), grid.dealias(phi_t)

    def step(self, state: WaterWaveState, dt: float, nsteps: int = 1) -> WaterWaveState:
        if dt <= 0:
            raise ValueError(f"dt must be positive, got {dt}")
        z, f = state.zeta, state.phi_s
        U = state.mean_slope

        def stage(zz, ff):
            return self.rhs(WaterWaveState(zz, ff, mean_slope=U))

        for _ in range(nsteps):
            k1 = stage(z, f)
            k2 = stage(z + 0.5 * dt * k1[0], f + 0.5 * dt * k1[1])
            k3 = stage(z + 0.5 * dt * k2[0], f + 0.5 * dt * k2[1])
            k4 = stage(z + dt * k3[0], f + dt * k3[1])
            z = z + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
            f = f + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
            self._check(z, f)
        return WaterWaveState(zeta=z, phi_s=f, t=state.t + nsteps * dt, mean_slope=U)

    def _check(self, zeta, phi_s):
        if not (np.all(np.isfinite(zeta)) and np.all(np.isfinite(phi_s))):
            raise BlowUpError("water-wave solution became non-finite")
        peak = float(np.max(np.abs(zeta)))
        if peak > BLOWUP_GUARD:
            raise BlowUpError(f"water-wave solution exceeded blow-up guard: {peak:.3g}")
        if not 1.0 + self.params.eps * float(np.min(zeta)) > 0.0:
            raise DegenerateDepthError("fluid depth collapsed")


def zcs_rhs(state: WaterWaveState, p: ModelParams, vg: VerticalGrid, grid: Grid1D):
    return ZCSModel(grid, vg, p).rhs(state)


def step(state: WaterWaveState, dt: float, p: ModelParams, vg: VerticalGrid, grid: Grid1D):
    return ZCSModel(grid, vg, p).step(state, dt)
