"""Pseudospectral KdV, Peregrine and water-wave solvers with a momentum-density convergence harness."""

from .spectral import Grid1D, ModelParams

__all__ = ["Grid1D", "ModelParams"]
__version__ = "0.1.0"
