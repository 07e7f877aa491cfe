"""Engel series map, Euclidean algorithm map, and grid transfer operators.

The transfer operator of a piecewise-affine map is computed exactly on
piecewise-constant densities: every (cell, branch) piece is an interval whose
image is an interval carrying density ``value / slope``.  The only
approximation is the cell-average projection of those images back onto the
grid.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterator

import numpy as np
import scipy.integrate
import scipy.sparse

from .core import (
    DomainError,
    GridDensity,
    TailReport,
    TruncationPolicy,
    l1_distance,
    truncated_series,
)


class QuadratureError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# piecewise-affine maps


@dataclass(frozen=True)
class AffineBranch:
    lo: float  # domain is (lo, hi]
    hi: float
    slope: float
    intercept: float

    def forward(self, x):
        return self.slope * x + self.intercept

    def inverse(self, y):
        return (y - self.intercept) / self.slope


class PiecewiseAffineMap:
    """Countable family of affine branches with disjoint half-open domains.

    ``branches_in(a, b)`` yields the branches whose domain meets ``(a, b]``;
    a finite family just filters its list, the Engel map computes the index
    range directly.
    """

    def __init__(self, branches=None, name: str = ""):
        self._branches = sorted(branches or [], key=lambda br: br.lo)
        self.name = name

    def branches_in(self, a: float, b: float) -> Iterator[AffineBranch]:
        for br in self._branches:
            if br.lo < b and br.hi > a:
                yield br

    def branch_at(self, x: float) -> AffineBranch:
        for br in self.branches_in(x - 1e-300, x):
            if br.lo < x <= br.hi:
                return br
        raise DomainError(f"{x} is outside every branch of {self.name or 'the map'}")

    def __call__(self, x: float) -> float:
        return self.branch_at(x).forward(x)

    def apply_array(self, x: np.ndarray) -> np.ndarray:
        return np.array([self(float(v)) for v in x])


class EngelMap(PiecewiseAffineMap):
    """``x -> ([1/x] + 1) x - 1`` on ``(0, 1]``; branch k lives on ``(1/(k+1), 1/k]``."""

    def __init__(self):
        super().__init__(name="engel")

    @staticmethod
    def branch(k: int) -> AffineBranch:
        return AffineBranch(1.0 / (k + 1), 1.0 / k, float(k + 1), -1.0)

    def branches_in(self, a, b):
        a = max(a, 0.0)
        if b <= a:
            return
        k_min = max(1, math.floor(1.0 / b) - 1)
        k_max = math.ceil(1.0 / a) + 1 if a > 0 else None
        if k_max is None:
            raise ValueError("the Engel map has infinitely many branches near 0")
        for k in range(k_min, k_max + 1):
            br = self.branch(k)
            if br.lo < b and br.hi > a:
                yield br

    def branch_at(self, x):
        if not 0 < x <= 1:
            raise DomainError(f"Engel map is defined on (0, 1], got {x}")
        k = math.floor(1.0 / x)
        if (k + 1) * x <= 1.0:  # rounding put x on the left end of branch k+1
            k += 1
        return self.branch(k)

    def __call__(self, x):
        return engel_apply(x)

    def apply_array(self, x):
        return engel_apply_array(x)


ENGEL = EngelMap()


def doubling_map() -> PiecewiseAffineMap:
    """``x -> 2x mod 1`` on ``(0, 1]``; Lebesgue measure is invariant for it."""
    return PiecewiseAffineMap(
        [AffineBranch(0.0, 0.5, 2.0, 0.0), AffineBranch(0.5, 1.0, 2.0, -1.0)], "doubling"
    )


def engel_apply(x: float) -> float:
    if not 0 < x <= 1:
        raise DomainError(f"Engel map is defined on (0, 1], got {x}")
    return float(engel_apply_array(np.array([x]))[0])


def engel_apply_array(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    k = np.floor(1.0 / x)
    y = (k + 1.0) * x - 1.0
    # floor(1/x) can overshoot by one when x sits on a branch endpoint
    return np.where(y > 0, y, (k + 2.0) * x - 1.0)


# ---------------------------------------------------------------------------
# grid transfer operator


class GridTransfer:
    """Transfer operator of ``T`` with respect to Lebesgue measure on a fixed grid.

    Output value of cell j is ``(1/h) sum_i W[j, i] v_i``, where ``W[j, i]``
    is the length of (image of cell i) inside cell j divided by the slope.
    The first ``absorbing_cells`` cells are a sink: mass landing there, or
    already there, goes to ``escaped_mass``.  Mass mapped outside the domain
    also escapes.
    """

    def __init__(self, tmap: PiecewiseAffineMap, lo: float, hi: float, n_cells: int,
                 absorbing_cells: int = 0):
        self.tmap, self.lo, self.hi, self.n = tmap, lo, hi, n_cells
        self.absorbing = absorbing_cells
        self.h = (hi - lo) / n_cells
        rows, cols, vals = [], [], []
        escape = np.zeros(n_cells)
        escape[:absorbing_cells] = self.h
        h = self.h
        for i in range(absorbing_cells, n_cells):
            a, b = lo + i * h, lo + (i + 1) * h
            for br in tmap.branches_in(a, b):
                pa, pb = max(a, br.lo), min(b, br.hi)
                if pb <= pa:
                    continue
                c, d = sorted((br.forward(pa), br.forward(pb)))
                weight = 1.0 / abs(br.slope)
                js, lens = self._overlaps(c, d)
                keep = js >= absorbing_cells
                rows.append(js[keep])
                cols.append(np.full(int(keep.sum()), i))
                vals.append(lens[keep] * weight)
                escape[i] += (float(np.sum(lens[~keep])) + self._outside(c, d)) * weight
        self.matrix = scipy.sparse.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n_cells, n_cells),
        )
        self.escape = escape

    def _overlaps(self, c: float, d: float):
        lo, h = self.lo, self.h
        c, d = max(c, lo), min(d, self.hi)
        if d <= c:
            return np.zeros(0, dtype=np.int64), np.zeros(0)
        j0 = min(max(math.floor((c - lo) / h), 0), self.n - 1)
        j1 = min(max(math.ceil((d - lo) / h) - 1, j0), self.n - 1)
        js = np.arange(j0, j1 + 1)
        left = np.maximum(lo + js * h, c)
        right = np.minimum(lo + (js + 1) * h, d)
        lens = np.clip(right - left, 0.0, None)
        return js, lens

    def _outside(self, c, d):
        return max(0.0, min(d, self.lo) - c) + max(0.0, d - max(c, self.hi))

    def __call__(self, f: GridDensity) -> GridDensity:
        if (f.lo, f.hi, f.n_cells) != (self.lo, self.hi, self.n):
            raise DomainError("density is not on this operator's grid")
        out = (self.matrix @ f.values) / self.h
        escaped = f.escaped_mass + float(self.escape @ f.values)
        return f.with_values(out, escaped_mass=escaped)


@lru_cache(maxsize=8)
def engel_operator(n_cells: int) -> GridTransfer:
    return GridTransfer(ENGEL, 0.0, 1.0, n_cells, absorbing_cells=1)


def engel_transfer(f: GridDensity) -> GridDensity:
    """Engel transfer operator on a grid over ``(0, 1]``.

    The first cell ``(0, eps]`` is absorbing (the map sends it into itself),
    so anything reaching it is booked as ``escaped_mass``.
    """
    if (f.lo, f.hi) != (0.0, 1.0):
        raise DomainError("Engel densities live on (0, 1]")
    return engel_operator(f.n_cells)(f)


def engel_transfer_one(y):
    """Pointwise ``T_hat 1`` for the Engel map: ``sum_{k <= 1/y} 1/(k+1)``."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    K = np.floor(1.0 / y).astype(np.int64)
    harmonic = np.concatenate([[0.0], np.cumsum(1.0 / np.arange(2, K.max() + 2))])
    out = harmonic[K]
    return float(out[0]) if out.size == 1 else out


def orbit_pullback(f: GridDensity, n: int, tmap=None) -> GridDensity:
    """``f o T^n`` sampled at cell midpoints (exact for ``n = 0``)."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0:
        return f.with_values(f.values.copy(), escaped_mass=0.0)
    step = (tmap or ENGEL).apply_array
    x = f.midpoints()
    for _ in range(n):
        x = step(x)
    return f.with_values(f.value_at(x), escaped_mass=0.0)


def dense_pullback(f: GridDensity, n: int, factor: int = 10, tmap=None) -> GridDensity:
    """Cell averages of ``f o T^n`` from ``factor`` samples per cell (oracle)."""
    step = (tmap or ENGEL).apply_array
    h = f.cell_width
    x = (f.lo + h * (np.arange(f.n_cells * factor) + 0.5) / factor)
    for _ in range(n):
        x = step(x)
    vals = f.value_at(x).reshape(f.n_cells, factor).mean(axis=1)
    return f.with_values(vals, escaped_mass=0.0)


def l1_modulus(f: GridDensity) -> float:
    """``int |f(x + h) - f(x)| dx`` for one cell width h, f extended by 0."""
    v = np.concatenate([[0.0], f.values, [0.0]])
    return float(np.sum(np.abs(np.diff(v))) * f.cell_width)


@dataclass
class SeriesResult:
    density: GridDensity
    tail: TailReport
    terms: int  # N in F_N
    pullback_last: GridDensity
    transfer_next: GridDensity  # T_hat^{N+1} f
    fixed_point_residual: float  # ||T_hat F_N - F_N||_1
    telescoping_defect: float
    projection_bound: float

    def summary(self) -> dict:
        return {
            **self.tail.as_dict(),
            "N": self.terms,
            "fixed_point_residual": self.fixed_point_residual,
            "telescoping_defect": self.telescoping_defect,
            "projection_bound": self.projection_bound,
            "escaped_mass": self.density.escaped_mass,
        }


def invariant_density_series(f: GridDensity, policy: TruncationPolicy,
                             transfer: Callable | None = None, tmap=None) -> SeriesResult:
    """``F_N = sum_{n=0}^N f o T^n + sum_{n=1}^N T_hat^n f``, cut off by term norm.

    Term n is ``f o T^n + T_hat^n f`` (just ``f`` for n = 0).  Besides the
    sum, reports ``||T_hat F_N - F_N||_1`` and the distance of
    ``T_hat F_N - F_N`` from ``T_hat^{N+1} f - f o T^N``.  That telescoping
    form relies on ``T_hat(g o T) = g``, i.e. on Lebesgue measure being
    invariant; for the Engel map it is not, and the defect shows it.
    """
    if np.any(f.values < 0):
        raise ValueError("f must be nonnegative")
    transfer = transfer or engel_transfer
    state = {"push": f}

    def term(n):
        pull = orbit_pullback(f, n, tmap)
        if n == 0:
            return pull
        state["push"] = transfer(state["push"])
        push = state["push"]
        return pull.with_values(pull.values + push.values, escaped_mass=push.escaped_mass)

    F, tail = truncated_series(term, policy)
    N = tail.terms_used - 1
    pull_last = orbit_pullback(f, N, tmap)
    push_next = transfer(state["push"])
    TF = transfer(F.with_values(F.values, escaped_mass=0.0))
    residual = l1_distance(TF, F)
    predicted = push_next.values - pull_last.values
    telescoping = float(np.sum(np.abs((TF.values - F.values) - predicted)) * F.cell_width)
    bound = 2 * (N + 1) * l1_modulus(f)
    return SeriesResult(F, tail, N, pull_last, push_next, residual, telescoping, bound)


@dataclass
class WitnessReport:
    success: bool
    steps: int
    restricted_norms: list[float]
    mass_defects: list[float]  # relative change of grid + escaped mass per step
    probes: list[float]
    probe_partial_sums: list[list[float]]

    def summary(self) -> dict:
        return {
            "success": self.success,
            "steps": self.steps,
            "final_restricted_norm": self.restricted_norms[-1],
            "max_mass_defect": max(self.mass_defects, default=0.0),
        }


def probe_points(count: int) -> np.ndarray:
    """Points ``(j + golden fraction)/count``: off the rational fixed points ``1/k``."""
    g = (math.sqrt(5) - 1) / 2
    return (np.arange(count) + g) / count


def dissipativity_witness(f: GridDensity, policy: TruncationPolicy,
                          n_probes: int = 8) -> WitnessReport:
    """Watch the mass of ``T_hat^n f`` on ``(eps, 1]`` drain away.

    Also records partial sums of ``f(T^n x)`` at a few probe points; these
    stay bounded because each orbit decreases to 0.
    """
    if np.any(f.values < 0):
        raise ValueError("f must be nonnegative")
    g = f
    norms = [g.l1_norm()]
    defects = []
    x = probe_points(n_probes)
    sums = [f.value_at(x).tolist()]
    success = norms[-1] <= policy.tail_tolerance
    steps = 0
    while not success and steps < policy.max_terms:
        before = g.total_mass()
        g = engel_transfer(g)
        steps += 1
        after = g.total_mass()
        defects.append(abs(after - before) / before if before else 0.0)
        norms.append(g.l1_norm())
        x = engel_apply_array(x)
        sums.append((np.asarray(sums[-1]) + f.value_at(x)).tolist())
        success = norms[-1] <= policy.tail_tolerance
    return WitnessReport(success, steps, norms, defects, probe_points(n_probes).tolist(), sums)


def export_density(g: GridDensity, csv_path, json_path) -> None:
    """CSV of ``(cell_midpoint, value)`` with a JSON header file."""
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cell_midpoint", "value"])
        for x, v in zip(g.midpoints(), g.values):
            w.writerow([f"{x:.17g}", f"{v:.17g}"])
    header = {"domain": [g.lo, g.hi], "n_cells": g.n_cells, "escaped_mass": g.escaped_mass}
    with open(json_path, "w") as fh:
        json.dump(header, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Euclidean algorithm map


@dataclass(frozen=True)
class EuclideanState:
    x: float
    y: float

    def __post_init__(self):
        if not (self.x > 0 and self.y > 0):
            raise DomainError(f"coordinates must be positive, got ({self.x}, {self.y})")


def euclid_apply(s: EuclideanState) -> EuclideanState:
    if s.x == s.y:
        raise DomainError(f"step undefined on the diagonal ({s.x}, {s.y})")
    if s.x > s.y:
        return EuclideanState(s.x - s.y, s.y)
    return EuclideanState(s.x, s.y - s.x)


def euclid_orbit_end(a, b) -> tuple[object, int]:
    """Iterate until the diagonal is hit; returns the common value and step count."""
    s, steps = EuclideanState(a, b), 0
    while s.x != s.y:
        s = euclid_apply(s)
        steps += 1
    return s.x, steps


@dataclass(frozen=True)
class PlanarRectangle:
    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float

    def __post_init__(self):
        if min(self.x_lo, self.y_lo) <= 0:
            raise DomainError("rectangle must lie in the open positive quadrant")
        if not (self.x_lo < self.x_hi and self.y_lo < self.y_hi):
            raise DomainError(f"degenerate rectangle {self}")


def euclid_rect_measure(A: PlanarRectangle) -> float:
    """``mu(A)`` for ``dmu = dx dy / (x y)``."""
    return math.log(A.x_hi / A.x_lo) * math.log(A.y_hi / A.y_lo)


def _preimage_integrands(A: PlanarRectangle):
    # substitute t = log(coordinate) so that dt = dy / y
    def first(t):  # points (x + y, y): x in [x_lo, x_hi]
        y = np.exp(t)
        return np.log((A.x_hi + y) / (A.x_lo + y))

    def second(t):  # points (x, y + x)
        x = np.exp(t)
        return np.log((A.y_hi + x) / (A.y_lo + x))

    return ((first, math.log(A.y_lo), math.log(A.y_hi)),
            (second, math.log(A.x_lo), math.log(A.x_hi)))


def _gauss_legendre(fn, a, b, n):
    nodes, weights = np.polynomial.legendre.leggauss(n)
    t = 0.5 * (b - a) * nodes + 0.5 * (b + a)
    return 0.5 * (b - a) * float(np.dot(weights, fn(t)))


def euclid_preimage_measure(A: PlanarRectangle, quadrature_points: int = 64,
                            agreement: float = 1e-9) -> float:
    """``mu(T^-1 A)`` by adaptive quadrature, cross-checked at two Gauss orders."""
    total = 0.0
    for fn, a, b in _preimage_integrands(A):
        val, err = scipy.integrate.quad(fn, a, b, epsabs=0.0, epsrel=1e-13, limit=200)
        g1 = _gauss_legendre(fn, a, b, quadrature_points)
        g2 = _gauss_legendre(fn, a, b, 2 * quadrature_points)
        scale = max(abs(val), 1e-300)
        if abs(g1 - g2) > agreement * scale or abs(val - g2) > agreement * scale:
            raise QuadratureError(
                f"quadrature disagreement on [{math.exp(a):.6g}, {math.exp(b):.6g}]: "
                f"adaptive={val!r} (est. err {err:.2e}), "
                f"GL{quadrature_points}={g1!r}, GL{2 * quadrature_points}={g2!r}"
            )
        total += val
    return total


def euclid_invariance_defect(A: PlanarRectangle, quadrature_points: int = 64) -> float:
    """Relative defect ``|mu(T^-1 A) - mu(A)| / mu(A)``."""
    direct = euclid_rect_measure(A)
    if direct == 0:
        raise DomainError("rectangle has zero measure")
    return abs(euclid_preimage_measure(A, quadrature_points) - direct) / direct
