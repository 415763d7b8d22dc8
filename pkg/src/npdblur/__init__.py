"""Nested primal-dual deblurring solvers with spectral polynomial
preconditioning, plus a small benchmark harness."""

from . import bench, configio, grids, metrics, regularizers, solvers, spectral

__all__ = [
    "bench",
    "configio",
    "grids",
    "metrics",
    "regularizers",
    "solvers",
    "spectral",
]

__version__ = "0.1.0"
