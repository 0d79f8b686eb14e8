"""Numerical verification toolkit for coboundary dynamical Poisson groupoids."""
from .liealg import RootSystem, SimpleLieAlgebra, build_algebra
from .residual import Residual

__version__ = "0.1.0"

__all__ = ["RootSystem", "SimpleLieAlgebra", "build_algebra", "Residual", "__version__"]
