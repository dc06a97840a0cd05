"""Optimal quadrature rules for B-spline spaces found by gradient descent."""

from .splines import Partition, SplineSpace, BSplineCurve, make_space
from .quadrature import QuadratureRule, optimal_point_count, gauss_legendre, ewg_rule, verify_exactness
from .discovery import SearchConfig, SearchResult, search, discover_uniform, discover_nonuniform

__all__ = [
    "Partition", "SplineSpace", "BSplineCurve", "make_space",
    "QuadratureRule", "optimal_point_count", "gauss_legendre", "ewg_rule", "verify_exactness",
    "SearchConfig", "SearchResult", "search", "discover_uniform", "discover_nonuniform",
]
