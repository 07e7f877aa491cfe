"""Shared scalar types, grid densities, norms and truncated series.

Exact quantities (everything on the Markov shift) are ``fractions.Fraction``;
interval-map quantities are float64 arrays on a uniform grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable

import numpy as np

ExactRational = Fraction


class ShapeError(ValueError):
    """Two grid densities do not live on the same grid."""


class DomainError(ValueError):
    """An argument lies outside the domain of a map or measure."""


class PreconditionError(ValueError):
    """An operation was called with inputs violating its contract."""


def parse_rational(text: str | int | Fraction) -> Fraction:
    """Parse ``"a/b"`` (or an integer) into an exact rational.

    Decimal strings are rejected on purpose: ``"0.1"`` has no exact binary
    meaning and a silent conversion would defeat zero-tolerance checks.
    """
    if isinstance(text, Fraction):
        return text
    if isinstance(text, int):
        return Fraction(text)
    s = str(text).strip()
    num, sep, den = s.partition("/")
    try:
        n = int(num)
        d = int(den) if sep else 1
    except ValueError:
        raise ValueError(f"not a rational of the form 'a/b': {text!r}") from None
    if d == 0:
        raise ValueError(f"zero denominator in {text!r}")
    return Fraction(n, d)


def format_rational(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


@dataclass
class GridDensity:
    """Piecewise-constant nonnegative density on ``(lo, hi]`` split into equal cells.

    Cell ``i`` is ``(lo + i*h, lo + (i+1)*h]``.  ``escaped_mass`` accumulates
    mass that an operator pushed out of the represented domain.
    """

    lo: float
    hi: float
    values: np.ndarray
    escaped_mass: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size == 0:
            raise ShapeError("values must be a nonempty 1-d array")
        if not self.hi > self.lo:
            raise DomainError(f"empty domain ({self.lo}, {self.hi}]")

    @property
    def n_cells(self) -> int:
        return self.values.size

    @property
    def cell_width(self) -> float:
        return (self.hi - self.lo) / self.n_cells

    def midpoints(self) -> np.ndarray:
        h = self.cell_width
        return self.lo + h * (np.arange(self.n_cells) + 0.5)

    def edges(self) -> np.ndarray:
        return self.lo + self.cell_width * np.arange(self.n_cells + 1)

    def grid_mass(self) -> float:
        return float(np.sum(self.values) * self.cell_width)

    def total_mass(self) -> float:
        return self.grid_mass() + self.escaped_mass

    def l1_norm(self) -> float:
        return float(np.sum(np.abs(self.values)) * self.cell_width)

    def cell_index(self, x):
        """Index of the cell containing ``x`` (``-1`` / ``n_cells`` outside)."""
        x = np.asarray(x, dtype=float)
        idx = np.ceil((x - self.lo) / self.cell_width).astype(np.int64) - 1
        return np.clip(idx, -1, self.n_cells)

    def value_at(self, x):
        """Evaluate the piecewise-constant density; zero outside ``(lo, hi]``."""
        idx = self.cell_index(x)
        inside = (idx >= 0) & (idx < self.n_cells)
        out = np.where(inside, self.values[np.clip(idx, 0, self.n_cells - 1)], 0.0)
        return float(out) if out.ndim == 0 else out

    def same_grid(self, other: GridDensity) -> bool:
        return (self.lo, self.hi, self.n_cells) == (other.lo, other.hi, other.n_cells)

    def with_values(self, values, escaped_mass: float | None = None) -> GridDensity:
        return replace(
            self,
            values=np.asarray(values, dtype=float),
            escaped_mass=self.escaped_mass if escaped_mass is None else escaped_mass,
        )

    def zeros_like(self) -> GridDensity:
        return GridDensity(self.lo, self.hi, np.zeros(self.n_cells), 0.0)

    @classmethod
    def constant(cls, value: float, n_cells: int, lo: float = 0.0, hi: float = 1.0):
        return cls(lo, hi, np.full(n_cells, float(value)))

    @classmethod
    def indicator(cls, a: float, b: float, n_cells: int, lo: float = 0.0, hi: float = 1.0):
        """Cell averages of the indicator of ``(a, b]`` (exact overlap fractions)."""
        g = cls(lo, hi, np.zeros(n_cells))
        e = g.edges()
        overlap = np.clip(np.minimum(e[1:], b) - np.maximum(e[:-1], a), 0.0, None)
        g.values = overlap / g.cell_width
        return g

    @classmethod
    def from_function(cls, fn: Callable, n_cells: int, lo: float = 0.0, hi: float = 1.0):
        """Sample ``fn`` at cell midpoints."""
        g = cls(lo, hi, np.zeros(n_cells))
        g.values = np.asarray(fn(g.midpoints()), dtype=float)
        return g


def l1_distance(f: GridDensity, g: GridDensity) -> float:
    """L1 distance of the gridded parts; escaped mass is ignored."""
    if not f.same_grid(g):
        raise ShapeError(
            f"grid mismatch: ({f.lo}, {f.hi}]x{f.n_cells} vs ({g.lo}, {g.hi}]x{g.n_cells}"
        )
    return float(np.sum(np.abs(f.values - g.values)) * f.cell_width)


@dataclass(frozen=True)
class TruncationPolicy:
    max_terms: int = 200
    tail_tolerance: float = 1e-6

    def __post_init__(self):
        if self.max_terms < 1:
            raise ValueError("max_terms must be positive")
        if not self.tail_tolerance > 0:
            raise ValueError("tail_tolerance must be positive")


@dataclass
class TailReport:
    terms_used: int
    last_term_norm: float
    converged: bool
    term_norms: list[float] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "terms_used": self.terms_used,
            "last_term_norm": self.last_term_norm,
            "converged": self.converged,
        }


def truncated_series(
    term: Callable[[int], GridDensity], policy: TruncationPolicy
) -> tuple[GridDensity, TailReport]:
    """Sum ``term(0) + term(1) + ...`` until a term's L1 norm drops to the tolerance.

    ``term`` is called with consecutive indices starting at 0, so it may keep
    state between calls.  Running out of ``max_terms`` is reported through
    ``TailReport.converged`` rather than raised.
    """
    total = None
    norms = []
    for n in range(policy.max_terms):
        t = term(n)
        if total is None:
            total = t.with_values(t.values.copy())
        else:
            if not total.same_grid(t):
                raise ShapeError(f"term {n} is on a different grid")
            total.values = total.values + t.values
            total.escaped_mass += t.escaped_mass
        norms.append(t.l1_norm())
        if norms[-1] <= policy.tail_tolerance:
            return total, TailReport(n + 1, norms[-1], True, norms)
    return total, TailReport(policy.max_terms, norms[-1], False, norms)
