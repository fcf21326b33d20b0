"""Momentum operator self-adjoint extensions on finite unions of intervals."""
from .boundary import BoundaryMatrix, BoundaryTraces, transfer_matrix
from .evolution import EigenBasisTruncation, evolve_ray, evolve_ray_function, evolve_spectral
from .funcspace import PiecewiseExp, PointFunction, QuadGrid, SampledFunction, inner_product, norm
from .geometry import IntervalUnion, TranslationSet, tiles_by
from .spectral import count_spectrum, eigenfunction, find_spectrum, resolvent_apply
from .spectraset import LambdaSet, build_boundary_matrix, fuglede_harness, gram_matrix, is_spectral_matrix

__version__ = "0.1.0"

__all__ = [
    "BoundaryMatrix",
    "BoundaryTraces",
    "transfer_matrix",
    "EigenBasisTruncation",
    "evolve_ray",
    "evolve_ray_function",
    "evolve_spectral",
    "PiecewiseExp",
    "PointFunction",
    "QuadGrid",
    "SampledFunction",
    "inner_product",
    "norm",
    "IntervalUnion",
    "TranslationSet",
    "tiles_by",
    "count_spectrum",
    "eigenfunction",
    "find_spectrum",
    "resolvent_apply",
    "LambdaSet",
    "build_boundary_matrix",
    "fuglede_harness",
    "gram_matrix",
    "is_spectral_matrix",
]
