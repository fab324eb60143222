"""
Periodic Fourier spectral infrastructure.

Fields are plain 1-D numpy arrays sampled at the nodes of a :class:`Grid1D`;
the grid owns the wavenumbers and every spectral operation.

Transform normalization: ``f_hat = rfft(f) / N`` so that
``integral(f**2) = L * sum_k |f_hat_k|**2`` (full two-sided sum).  The same
convention is used by :meth:`Grid1D.norm_hs_mu`.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

MAX_DERIVATIVE_ORDER = 4


class FieldError(ValueError):
    """A field violates a finiteness or shape requirement."""


@dataclass(frozen=True)
class ModelParams:
    """Amplitude parameter ``eps`` and long-wave parameter ``mu``.

    Construction enforces the long-wave/small-amplitude regime
    ``0 < mu <= 0.25`` and ``0 < eps <= 2 mu``.  Use :meth:`unchecked` for
    formal limits such as ``eps = mu = 0``.
    """

    eps: float
    mu: float
    check: bool = True

    def __post_init__(self):
        if not self.check:
            if self.eps < 0 or self.mu < 0:
                raise ValueError("eps and mu must be non-negative")
            return
        if not (0.0 < self.mu <= 0.25):
            raise ValueError(f"mu must satisfy 0 < mu <= 0.25, got {self.mu}")
        if not (0.0 < self.eps <= 2.0 * self.mu):
            raise ValueError(
                f"eps must satisfy 0 < eps <= 2*mu = {2 * self.mu}, got {self.eps}"
            )

    @classmethod
    def unchecked(cls, eps: float, mu: float) -> "ModelParams":
        return cls(eps=eps, mu=mu, check=False)


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic grid ``x_j = j*dx`` on ``[0, L)`` with ``N`` nodes."""

    length: float = 80.0
    num_points: int = 512

    def __post_init__(self):
        if self.length <= 0:
            raise ValueError(f"length must be positive, got {self.length}")
        n = self.num_points
        if int(n) != n or n < 8 or n % 2:
            raise ValueError(f"num_points must be an even integer >= 8, got {n}")

    @property
    def N(self) -> int:
        return self.num_points

    @property
    def L(self) -> float:
        return self.length

    @property
    def dx(self) -> float:
        return self.length / self.num_points

    @cached_property
    def x(self) -> np.ndarray:
        return np.arange(self.num_points) * self.dx

    @cached_property
    def k(self) -> np.ndarray:
        """Non-negative wavenumbers of the real transform (``N//2 + 1`` of them)."""
        return 2.0 * np.pi / self.length * np.arange(self.num_points // 2 + 1)

    @cached_property
    def k_odd(self) -> np.ndarray:
        # Nyquist mode is real-only: odd derivatives annihilate it.
        k = self.k.copy()
        k[-1] = 0.0
        return k

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        n = np.arange(self.num_points // 2 + 1)
        return n <= (2.0 / 3.0) * (self.num_points // 2)

    def wrap(self, values) -> np.ndarray:
        f = np.asarray(values, dtype=float)
        if f.shape != (self.num_points,):
            raise FieldError(f"expected shape ({self.num_points},), got {f.shape}")
        return f

    def check_finite(self, f: np.ndarray, name: str = "field") -> np.ndarray:
        if not np.all(np.isfinite(f)):
            raise FieldError(f"{name} contains non-finite values")
        return f

    # transforms -----------------------------------------------------------

    def to_spectral(self, f) -> np.ndarray:
        return np.fft.rfft(f, axis=0) / self.num_points

    def to_physical(self, f_hat) -> np.ndarray:
        return np.fft.irfft(f_hat * self.num_points, n=self.num_points, axis=0)

    def multiplier(self, order: int) -> np.ndarray:
        k = self.k_odd if order % 2 else self.k
        return (1j * k) ** order

    # operations -----------------------------------------------------------

    def derivative(self, f, order: int = 1) -> np.ndarray:
        """Spectral derivative of ``order`` 1..4 along the first axis."""
        if order not in range(1, MAX_DERIVATIVE_ORDER + 1):
            raise ValueError(f"derivative order must be in 1..{MAX_DERIVATIVE_ORDER}, got {order}")
        f_hat = np.fft.rfft(f, axis=0)
        m = self.multiplier(order)
        if f_hat.ndim > 1:
            m = m[:, None]
        return np.fft.irfft(m * f_hat, n=self.num_points, axis=0)

    def antiderivative(self, f, tol: float = 1e-12) -> np.ndarray:
        """Zero-mean primitive of a zero-mean periodic field."""
        f = np.asarray(f, dtype=float)
        mean = f.mean()
        if abs(mean) > tol * max(1.0, float(np.max(np.abs(f)))):
            raise ValueError(f"field has nonzero mean {mean:.3e}; primitive is not periodic")
        f_hat = np.fft.rfft(f)
        k = self.k_odd
        out = np.zeros_like(f_hat)
        out[1:] = f_hat[1:] / (1j * np.where(k[1:] == 0.0, 1.0, k[1:]))
        out[k == 0.0] = 0.0
        return np.fft.irfft(out, n=self.num_points)

    def dealias(self, f) -> np.ndarray:
        f_hat = np.fft.rfft(f, axis=0)
        mask = self.dealias_mask if f_hat.ndim == 1 else self.dealias_mask[:, None]
        return np.fft.irfft(np.where(mask, f_hat, 0.0), n=self.num_points, axis=0)

    def integral(self, f) -> float:
        return float(self.dx * np.sum(f))

    def mean(self, f) -> float:
        return float(np.mean(f))

    @staticmethod
    def norm_linf(f) -> float:
        return float(np.max(np.abs(f)))

    def norm_l2(self, f) -> float:
        return float(np.sqrt(self.integral(np.asarray(f) ** 2)))

    def norm_hs_mu(self, f, s: float = 2.0, mu: float = 0.0) -> float:
        """``(||f||_{H^s}^2 + mu ||f_x||_{H^s}^2)^{1/2}`` evaluated on the Fourier side."""
        if mu < 0:
            raise ValueError(f"mu must be non-negative, got {mu}")
        f_hat = self.to_spectral(np.asarray(f, dtype=float))
        # rfft holds each interior mode once; weight 2 restores the two-sided sum
        weight = np.full(f_hat.shape, 2.0)
        weight[0] = 1.0
        weight[-1] = 1.0
        k2 = self.k**2
        total = np.sum(
            weight * (1.0 + k2) ** s * (1.0 + mu * self.k_odd**2) * np.abs(f_hat) ** 2
        )
        return float(np.sqrt(self.length * total))


def edge_magnitude(f, width: int = 1) -> float:
    """Largest ``|f|`` over the ``width`` nodes on each side of the periodic seam."""
    f = np.asarray(f)
    return float(max(np.max(np.abs(f[:width])), np.max(np.abs(f[-width:]))))
