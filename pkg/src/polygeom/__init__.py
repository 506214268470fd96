"""Finite-matrix realizations of polynomial Hilbert geometries."""
from .geometry import GeometrySpec, WeightFunction, gram_matrix, derivative_matrix
from .numerics import PolyGeomError, SpecError, NumericalError, override_tolerances

__all__ = [
    "GeometrySpec",
    "NumericalError",
    "PolyGeomError",
    "SpecError",
    "WeightFunction",
    "derivative_matrix",
    "gram_matrix",
    "override_tolerances",
]
__version__ = "0.1.0"
