"""
KdV solver and KdV-side diagnostics.

    eta_t + eta_x + eps*(3/2)*eta*eta_x + mu*(1/6)*eta_xxx = 0

The linear part is propagated exactly in Fourier space (integrating-factor
RK4); the quadratic term is written in conservation form and dealiased.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import Grid1D, ModelParams

BLOWUP_GUARD = 10.0


class BlowUpError(RuntimeError):
    pass


@dataclass(frozen=True)
class KdVState:
    eta: np.ndarray
    t: float = 0.0


@dataclass(frozen=True)
class Soliton:
    """Exact travelling wave ``A sech^2(k (x - x0 - c t))``."""

    amplitude: float
    center: float
    params: ModelParams

    @property
    def speed(self) -> float:
        return 1.0 + 0.5 * self.params.eps * self.amplitude

    @property
    def width(self) -> float:
        p = self.params
        return float(np.sqrt(3.0 * p.eps * self.amplitude / (4.0 * p.mu)))

    def profile(self, grid: Grid1D, t: float = 0.0) -> np.ndarray:
        """Sampled on the periodic cell, with the crest wrapped into ``[0, L)``."""
        shift = (grid.x - self.center - self.speed * t + 0.5 * grid.L) % grid.L - 0.5 * grid.L
        return self.amplitude / np.cosh(self.width * shift) ** 2


def linear_symbol(grid: Grid1D, p: ModelParams) -> np.ndarray:
    """Fourier symbol of ``-d/dx - (mu/6) d^3/dx^3``."""
    k = grid.k_odd
    return -1j * (k - p.mu * k**3 / 6.0)


def _nonlinear_hat(eta: np.ndarray, grid: Grid1D, p: ModelParams) -> np.ndarray:
    # -(3 eps / 4) (eta^2)_x, dealiased, returned as raw rfft coefficients
    sq_hat = np.fft.rfft(eta * eta)
    sq_hat[~grid.dealias_mask] = 0.0
    return -0.75 * p.eps * 1j * grid.k_odd * sq_hat


def kdv_rhs(eta: np.ndarray, grid: Grid1D, p: ModelParams) -> np.ndarray:
    """``eta_t`` as given by the KdV equation."""
    eta_hat = np.fft.rfft(eta)
    out = linear_symbol(grid, p) * eta_hat + _nonlinear_hat(eta, grid, p)
    return np.fft.irfft(out, n=grid.N)


def kdv_rhs_tangent(eta: np.ndarray, deta: np.ndarray, grid: Grid1D, p: ModelParams) -> np.ndarray:
    """Directional derivative of :func:`kdv_rhs` at ``eta`` along ``deta``.

    With ``deta = eta_t`` this is ``eta_tt`` obtained by differentiating the
    equation in time.
    """
    prod_hat = np.fft.rfft(eta * deta)
    prod_hat[~grid.dealias_mask] = 0.0
    out = linear_symbol(grid, p) * np.fft.rfft(deta) - 1.5 * p.eps * 1j * grid.k_odd * prod_hat
    return np.fft.irfft(out, n=grid.N)


def default_dt(eta0: np.ndarray, grid: Grid1D, p: ModelParams) -> float:
    return 0.5 * grid.dx / (1.0 + p.eps * grid.norm_linf(eta0))


class KdVStepper:
    """Integrating-factor RK4 for a fixed ``(grid, params, dt)``."""

    def __init__(self, grid: Grid1D, p: ModelParams, dt: float):
        if dt <= 0:
            raise ValueError(f"dt must be positive, got {dt}")
        if dt > grid.dx:
            raise ValueError(f"dt = {dt} exceeds the step bound dx = {grid.dx}")
        self.grid = grid
        self.params = p
        self.dt = dt
        lam = linear_symbol(grid, p)
        self._half = np.exp(0.5 * dt * lam)
        self._full = self._half**2

    def _n(self, eta_hat):
        return self.dt * _nonlinear_hat(np.fft.irfft(eta_hat, n=self.grid.N), self.grid, self.params)

    def advance_hat(self, v):
        E, E2 = self._half, self._full
        a = self._n(v)
        b = self._n(E * (v + 0.5 * a))
        c = self._n(E * v + 0.5 * b)
        d = self._n(E2 * v + E * c)
        return E2 * v + (E2 * a + 2.0 * E * (b + c) + d) / 6.0

    def step(self, state: KdVState, nsteps: int = 1) -> KdVState:
        v = np.fft.rfft(state.eta)
        for _ in range(nsteps):
            v = self.advance_hat(v)
        eta = np.fft.irfft(v, n=self.grid.N)
        check_state(eta)
        return KdVState(eta=eta, t=state.t + nsteps * self.dt)


def check_state(eta: np.ndarray) -> None:
    if not np.all(np.isfinite(eta)):
        raise BlowUpError("KdV solution became non-finite")
    peak = float(np.max(np.abs(eta)))
    if peak > BLOWUP_GUARD:
        raise BlowUpError(f"KdV solution exceeded blow-up guard: max|eta| = {peak:.3g}")


def step(state: KdVState, dt: float, grid: Grid1D, p: ModelParams) -> KdVState:
    return KdVStepper(grid, p, dt).step(state)


def integrate(state: KdVState, T: float, dt: float, grid: Grid1D, p: ModelParams) -> KdVState:
    nsteps = int(round(T / dt))
    if not np.isclose(nsteps * dt, T, rtol=0, atol=1e-12 * max(1.0, T)):
        raise ValueError(f"T = {T} is not a multiple of dt = {dt}")
    return KdVStepper(grid, p, dt).step(state, nsteps)


# diagnostics ---------------------------------------------------------------


def conserved_integrals(eta: np.ndarray, grid: Grid1D, p: ModelParams):
    if p.eps <= 0:
        raise ValueError("third integral requires eps > 0")
    eta_x = grid.derivative(eta, 1)
    return (
        grid.integral(eta),
        grid.integral(eta**2),
        grid.integral(p.mu / (3.0 * p.eps) * eta_x**2 - eta**3),
    )


def mass_flux(eta: np.ndarray, grid: Grid1D, p: ModelParams) -> np.ndarray:
    """``eta + eps*(3/4)*eta^2 + mu*(1/6)*eta_xx``; the equation reads ``eta_t + flux_x = 0``."""
    return eta + 0.75 * p.eps * eta**2 + p.mu / 6.0 * grid.derivative(eta, 2)


def momentum_density_I(eta: np.ndarray, grid: Grid1D, p: ModelParams) -> np.ndarray:
    """KdV momentum density; the same expression as the mass flux."""
    return mass_flux(eta, grid, p)


def eta_xt(eta: np.ndarray, grid: Grid1D, p: ModelParams) -> np.ndarray:
    return grid.derivative(kdv_rhs(eta, grid, p), 1)


def v_kdv(eta: np.ndarray, grid: Grid1D, p: ModelParams) -> np.ndarray:
    """Velocity ``eta - eps/4 eta^2 - mu/6 eta_xt`` with ``eta_xt`` from the equation."""
    return eta - 0.25 * p.eps * eta**2 - p.mu / 6.0 * eta_xt(eta, grid, p)


def velocity_time_derivatives(eta: np.ndarray, grid: Grid1D, p: ModelParams):
    """``(eta_t, v_t, v_xxt)`` for ``v = v_kdv(eta)``, all by substituting the equation."""
    et = kdv_rhs(eta, grid, p)
    ett = kdv_rhs_tangent(eta, et, grid, p)
    vt = et - 0.5 * p.eps * eta * et - p.mu / 6.0 * grid.derivative(ett, 1)
    return et, vt, grid.derivative(vt, 2)


def proof_bound_quantity(eta: np.ndarray, grid: Grid1D, p: ModelParams) -> np.ndarray:
    """``eta_xx + eta_xt``, which is O(mu) along KdV solutions."""
    return grid.derivative(eta, 2) + eta_xt(eta, grid, p)
