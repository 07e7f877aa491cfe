"""Transfer operator of an absolutely continuous invariant measure and L1 decay.

For ``dmu = p dm`` the transfer operator of ``mu`` is
``1_[p>0] (1/p) T_m(f p)``.  On the shift this stays in the cylinder algebra
because ``p(x) = R(x_1..x_L) p(Tx)``, so ``T_m(f p) = p T_m(f R)``.  On grids
the division is done cellwise with a small-density mask.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .core import GridDensity, PreconditionError, ShapeError, format_rational
from .markov_shift import (
    CylinderFunction,
    ShiftDensity,
    extensions,
    is_valid,
    transfer_cylinder,
)

MASK_LEVEL = 1e-12


@dataclass
class DecayReport:
    norms: list
    kind: str  # "plain" or "cesaro"
    masked_mass: list[float] = field(default_factory=list)

    @property
    def first_index(self) -> int:
        return 0 if self.kind == "plain" else 1

    def indexed(self):
        return list(enumerate(self.norms, start=self.first_index))

    def is_non_increasing(self) -> bool:
        return all(b <= a for a, b in zip(self.norms, self.norms[1:]))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "norm"])
            for n, b in self.indexed():
                w.writerow([n, format_rational(b) if isinstance(b, Fraction) else f"{b:.17g}"])


def multiply_by_cocycle(f: CylinderFunction, p: ShiftDensity) -> CylinderFunction:
    """``f * R`` with ``R(x) = p(x)/p(Tx)``, refining words shorter than ``p.memory``."""
    out = []
    for w, c in f:
        if not is_valid(w):
            continue
        for u in extensions(w, p.memory):
            out.append((u, c * p.cocycle(u[: p.memory])))
    return CylinderFunction(out)


def _grid_mask(p: GridDensity, threshold: float) -> np.ndarray:
    top = float(np.max(p.values)) if p.values.size else 0.0
    return p.values > threshold * top


def _default_grid_transfer():
    from .interval_maps import engel_transfer

    return engel_transfer


def conjugated_transfer(f, p, base_transfer: Callable | None = None,
                        threshold: float = MASK_LEVEL):
    """Apply the transfer operator of ``p dm``.

    Shift case: ``f`` a CylinderFunction, ``p`` a ShiftDensity; the result is a
    cylinder function understood on ``{p > 0}``.  Grid case: both
    GridDensity; cells with ``p <= threshold * max p`` are set to 0.
    """
    if isinstance(f, CylinderFunction):
        if not isinstance(p, ShiftDensity):
            raise TypeError("cylinder functions need a ShiftDensity")
        base = base_transfer or (lambda g: transfer_cylinder(g, p.q))
        return base(multiply_by_cocycle(f, p))
    if not f.same_grid(p):
        raise ShapeError("f and p must share a grid")
    base = base_transfer or _default_grid_transfer()
    moved = base(f.with_values(f.values * p.values, escaped_mass=0.0))
    mask = _grid_mask(p, threshold)
    out = np.zeros_like(p.values)
    out[mask] = moved.values[mask] / p.values[mask]
    return f.with_values(out, escaped_mass=0.0)


def _grid_masked_mass(f: GridDensity, p: GridDensity, base, threshold) -> float:
    moved = base(f.with_values(f.values * p.values, escaped_mass=0.0))
    mask = _grid_mask(p, threshold)
    return float(np.sum(np.abs(moved.values[~mask])) * f.cell_width)


def _mu_integral(u, p):
    if isinstance(u, CylinderFunction):
        return u.total(p.measure)
    return float(np.sum(u.values * p.values) * u.cell_width)


def _mu_norm(u, p, threshold=MASK_LEVEL):
    if isinstance(u, CylinderFunction):
        return u.l1_norm(p.measure)
    mask = _grid_mask(p, threshold)
    return float(np.sum(np.abs(u.values[mask]) * p.values[mask]) * u.cell_width)


def _check_mean_zero(u, p):
    total = _mu_integral(u, p)
    if isinstance(u, CylinderFunction):
        if total != 0:
            raise PreconditionError(f"u is not mean-zero: integral = {total}")
    elif abs(total) > 1e-12 * max(1.0, _mu_norm(u, p)):
        raise PreconditionError(f"u is not mean-zero: integral = {total:.3e}")


def exactness_decay(u, p, N: int, base_transfer: Callable | None = None) -> DecayReport:
    """``b_n = ||T_mu^n u||_{L1(mu)}`` for ``n = 0..N``."""
    _check_mean_zero(u, p)
    grid = not isinstance(u, CylinderFunction)
    base = base_transfer or (_default_grid_transfer() if grid else None)
    norms, masked = [_mu_norm(u, p)], []
    g = u
    for _ in range(N):
        if grid:
            masked.append(_grid_masked_mass(g, p, base, MASK_LEVEL))
        g = conjugated_transfer(g, p, base)
        norms.append(_mu_norm(g, p))
    return DecayReport(norms, "plain", masked)


def ergodic_average_decay(u, p, N: int, base_transfer: Callable | None = None) -> DecayReport:
    """``a_n = ||(1/n) sum_{k<n} T_mu^k u||_{L1(mu)}`` for ``n = 1..N``."""
    _check_mean_zero(u, p)
    grid = not isinstance(u, CylinderFunction)
    base = base_transfer or (_default_grid_transfer() if grid else None)
    norms = []
    g, acc = u, None
    for n in range(1, N + 1):
        if grid:
            acc = g.values.copy() if acc is None else acc + g.values
            norms.append(_mu_norm(g.with_values(acc / n), p))
        else:
            acc = g if acc is None else acc + g
            norms.append(acc.l1_norm(p.measure) / n)
        if n < N:
            g = conjugated_transfer(g, p, base)
    return DecayReport(norms, "cesaro")


def markov_mean_zero_example(p: ShiftDensity) -> CylinderFunction:
    """``1_[1] mu([2]) - 1_[2] mu([1])``, mean zero for ``mu = p dm``."""
    return (CylinderFunction.indicator((1,), p.measure((2,)))
            - CylinderFunction.indicator((2,), p.measure((1,))))
