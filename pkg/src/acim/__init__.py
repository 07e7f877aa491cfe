"""Absolutely continuous invariant measures for dissipative transformations.

Exact cylinder-algebra computations for the monotone Markov shift on Z,
grid transfer operators for the Engel series map, and invariance checks for
the Euclidean algorithm map.
"""

from .core import (
    DomainError,
    ExactRational,
    GridDensity,
    PreconditionError,
    ShapeError,
    TailReport,
    TruncationPolicy,
    l1_distance,
    truncated_series,
)

__version__ = "0.1.0"
