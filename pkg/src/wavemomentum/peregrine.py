"""
Peregrine (Boussinesq) system

    xi_t + [(1 + eps xi) u]_x = 0
    u_t + xi_x + eps u u_x = (mu/3) u_xxt

The operator ``1 - (mu/3) d^2/dx^2`` is inverted with its Fourier symbol.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kdv import BLOWUP_GUARD, BlowUpError
from .spectral import Grid1D, ModelParams


class DepthError(RuntimeError):
    """Total depth ``1 + eps*xi`` is no longer positive."""


@dataclass(frozen=True)
class PeregrineState:
    xi: np.ndarray
    u: np.ndarray
    t: float = 0.0


def check_depth(xi: np.ndarray, p: ModelParams) -> None:
    depth = 1.0 + p.eps * float(np.min(xi))
    if not depth > 0.0:
        raise DepthError(f"non-positive total depth 1 + eps*min(xi) = {depth:.3g}")


def _check_state(xi, u, p):
    if not (np.all(np.isfinite(xi)) and np.all(np.isfinite(u))):
        raise BlowUpError("Peregrine solution became non-finite")
    peak = max(float(np.max(np.abs(xi))), float(np.max(np.abs(u))))
    if peak > BLOWUP_GUARD:
        raise BlowUpError(f"Peregrine solution exceeded blow-up guard: {peak:.3g}")
    check_depth(xi, p)


def elliptic_symbol(grid: Grid1D, p: ModelParams) -> np.ndarray:
    """Fourier symbol of ``(1 - (mu/3) d^2/dx^2)^{-1}``."""
    return 1.0 / (1.0 + p.mu * grid.k**2 / 3.0)


def peregrine_rhs(state: PeregrineState, grid: Grid1D, p: ModelParams):
    """Return ``(xi_t, u_t)``."""
    xi, u = state.xi, state.u
    check_depth(xi, p)
    ik = 1j * grid.k_odd
    mask = grid.dealias_mask

    flux_hat = np.fft.rfft(xi * u)
    flux_hat[~mask] = 0.0
    flux_hat = np.fft.rfft(u) + p.eps * flux_hat
    xi_t = np.fft.irfft(-ik * flux_hat, n=grid.N)

    # eps u u_x = (eps/2) (u^2)_x keeps the mean of u exactly conserved
    sq_hat = np.fft.rfft(u * u)
    sq_hat[~mask] = 0.0
    force_hat = -ik * (np.fft.rfft(xi) + 0.5 * p.eps * sq_hat)
    u_t = np.fft.irfft(elliptic_symbol(grid, p) * force_hat, n=grid.N)
    return xi_t, u_t


class PeregrineStepper:
    """Classical RK4."""

    def __init__(self, grid: Grid1D, p: ModelParams, dt: float):
        if dt <= 0:
            raise ValueError(f"dt must be positive, got {dt}")
        self.grid = grid
        self.params = p
        self.dt = dt

    def _rhs(self, xi, u):
        return peregrine_rhs(PeregrineState(xi, u), self.grid, self.params)

    def step(self, state: PeregrineState, nsteps: int = 1) -> PeregrineState:
        dt = self.dt
        xi, u = state.xi, state.u
        for _ in range(nsteps):
            k1 = self._rhs(xi, u)
            k2 = self._rhs(xi + 0.5 * dt * k1[0], u + 0.5 * dt * k1[1])
            k3 = self._rhs(xi + 0.5 * dt * k2[0], u + 0.5 * dt * k2[1])
            k4 = self._rhs(xi + dt * k3[0], u + dt * k3[1])
            xi = xi + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
            u = u + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
            _check_state(xi, u, self.params)
        return PeregrineState(xi=xi, u=u, t=state.t + nsteps * dt)


def step(state: PeregrineState, dt: float, grid: Grid1D, p: ModelParams) -> PeregrineState:
    return PeregrineStepper(grid, p, dt).step(state)


def integrate(state: PeregrineState, T: float, dt: float, grid: Grid1D, p: ModelParams):
    nsteps = int(round(T / dt))
    if not np.isclose(nsteps * dt, T, rtol=0, atol=1e-12 * max(1.0, T)):
        raise ValueError(f"T = {T} is not a multiple of dt = {dt}")
    return PeregrineStepper(grid, p, dt).step(state, nsteps)


def conserved_quantities(state: PeregrineState, grid: Grid1D, p: ModelParams):
    """``(integral(xi), integral(u - mu/3 u_xx))``."""
    u = state.u
    return (
        grid.integral(state.xi),
        grid.integral(u - p.mu / 3.0 * grid.derivative(u, 2)),
    )


def consistency_residuals(xi, v, xi_t, v_t, v_xxt, grid: Grid1D, p: ModelParams):
    """Raw residuals of an arbitrary pair ``(xi, v)`` under the Peregrine operators.

    Returns ``(xi_t + [(1+eps xi) v]_x,  v_t - mu/3 v_xxt + xi_x + eps v v_x)``.
    The caller supplies the time derivatives.  For a consistent family both
    are O(eps^2); division by ``eps**2`` is left to the caller.
    """
    flux = v + p.eps * grid.dealias(xi * v)
    r = xi_t + grid.derivative(flux, 1)
    R = (
        v_t
        - p.mu / 3.0 * v_xxt
        + grid.derivative(xi, 1)
        + 0.5 * p.eps * grid.derivative(grid.dealias(v * v), 1)
    )
    return r, R
