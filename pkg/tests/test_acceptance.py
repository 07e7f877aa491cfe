"""Acceptance criteria, one test each, run at their stated tolerances and time budgets.

Every test records a ``criterion`` property; conftest prints one PASS/FAIL line
per criterion at the end of the session.
"""

import math
import time
from fractions import Fraction

import pytest

from acim.core import GridDensity, TruncationPolicy
from acim.ergodicity import conjugated_transfer, exactness_decay, markov_mean_zero_example
from acim.interval_maps import (
    PlanarRectangle,
    dissipativity_witness,
    euclid_invariance_defect,
    invariant_density_series,
)
from acim.markov_shift import (
    CylinderFunction,
    F_density,
    PrefixClass,
    adjoint_defects,
    explicit_F,
    invariance_check,
    prefix_class,
    remark1_identity,
    valid_words,
)
from acim.wandering import (
    annihilating_density,
    non_proportionality_witness,
    verify_annihilation_and_invariance,
)

pytestmark = pytest.mark.acceptance


class Clock:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def report(record_property, crit, detail):
    record_property("criterion", crit)
    record_property("detail", detail)


def test_criterion_01_explicit_density_invariance(record_property):
    with Clock() as c:
        reps = {q: invariance_check(6, (-3, 3), q) for q in ("1/4", "1/2", "3/4")}
    ok = all(r.ok for r in reps.values())
    checked = sum(r.checked for r in reps.values())
    report(record_property, "1",
           f"{checked} cylinders, defects={sum(len(r.defects) for r in reps.values())}, "
           f"{c.elapsed:.2f}s (budget 5s)")
    assert ok
    assert c.elapsed < 5


def test_criterion_02_density_cases(record_property):
    with Clock() as c:
        zeros = [explicit_F(prefix_class(w), q) for q in ("1/2", "1/3")
                 for w in [(0, 0), (-2, -1, 0, 0, 1), (0, 0, 0)]]
        ones = [explicit_F(prefix_class(w), q) for q in ("1/2", "1/3")
                for w in [(-1, 0, 1), (-3, -2, -1, 0, 1, 2)]]
        qs = [(explicit_F(prefix_class(w), q), Fraction(q)) for q in ("1/2", "1/3")
              for w in [(5,), (0, 1), (1, 2, 2)]]
        cls = explicit_F(PrefixClass(-2, 4, 2, True), "1/2")
    ok = (all(v == 0 for v in zeros) and all(v == 1 for v in ones)
          and all(v == q for v, q in qs) and cls == 0)
    report(record_property, "2", f"0/1/q cases exact, {c.elapsed:.3f}s (budget 1s)")
    assert ok
    assert c.elapsed < 1


def test_criterion_03_series_identity(record_property):
    with Clock() as c:
        bad, n = [], 0
        for q in (Fraction(1, 3), Fraction(1, 2)):
            for w in valid_words(-3, 3, 5):
                lhs, rhs = remark1_identity(w, q)
                n += 1
                if lhs != rhs:
                    bad.append((q, w, lhs, rhs))
        classes = {(w[0] < 0, w[0] == 0, prefix_class(w).zero_block_closed)
                   for w in valid_words(-3, 3, 5)}
    report(record_property, "3",
           f"{n} prefixes over {len(classes)} classes, mismatches={len(bad)}, "
           f"{c.elapsed:.2f}s (budget 1s)")
    assert not bad
    assert len(classes) >= 5
    assert c.elapsed < 1


def test_criterion_04_adjoint_identity(record_property):
    q = Fraction(1, 2)
    with Clock() as c:
        words = list(valid_words(-3, 3, 4))
        bad = adjoint_defects([CylinderFunction.indicator(w) for w in words], words, q)
    report(record_property, "4",
           f"{len(words)}^2 generator pairs, defects={len(bad)}, {c.elapsed:.2f}s (budget 5s)")
    assert not bad
    assert c.elapsed < 5


@pytest.fixture(scope="module")
def engel_series():
    f = GridDensity.indicator(0.5, 1.0, 4096)
    with Clock() as c:
        res = invariant_density_series(f, TruncationPolicy(200, 1e-6))
    return res, c.elapsed


def test_criterion_05_engel_series(record_property, engel_series):
    res, elapsed = engel_series
    converged = res.tail.converged
    fixed = res.fixed_point_residual <= 1e-4
    tele = res.telescoping_defect <= res.projection_bound
    report(record_property, "5",
           f"tail converged={converged} (N={res.terms}); "
           f"residual={res.fixed_point_residual:.3g} (<=1e-4: {fixed}); "
           f"telescoping={res.telescoping_defect:.3g} vs bound {res.projection_bound:.3g} "
           f"({tele}); {elapsed:.2f}s (budget 60s)")
    assert converged
    assert res.fixed_point_residual <= 1e-4
    assert res.telescoping_defect <= res.projection_bound
    assert elapsed < 60


def test_criterion_06_dissipativity_witness(record_property):
    f = GridDensity.indicator(0.5, 1.0, 4096)
    with Clock() as c:
        w = dissipativity_witness(f, TruncationPolicy(200, 1e-6))
    worst = max(w.mass_defects)
    report(record_property, "6",
           f"restricted norm {w.restricted_norms[-1]:.3g} after {w.steps} steps, "
           f"max relative mass defect {worst:.2g}, {c.elapsed:.2f}s (budget 30s)")
    assert w.success and w.steps <= 200
    assert worst <= 1e-12
    assert c.elapsed < 30


def test_criterion_07_euclid_invariance(record_property):
    rects = [PlanarRectangle(1, math.e, 1, math.e), PlanarRectangle(0.1, 0.2, 5, 10),
             PlanarRectangle(0.5, 2, 0.25, 4)]
    with Clock() as c:
        defects = [euclid_invariance_defect(A) for A in rects]
    report(record_property, "7",
           f"relative defects {[f'{d:.2g}' for d in defects]}, {c.elapsed:.2f}s (budget 10s)")
    assert max(defects) <= 1e-6
    assert c.elapsed < 10


def test_criterion_08_conjugated_operator(record_property):
    p = F_density("1/2")
    with Clock() as c:
        words = list(valid_words(-3, 3, 4))
        fs = [CylinderFunction.indicator(w) for w in words]
        bad = adjoint_defects(fs, words, p.q, transfer=lambda g: conjugated_transfer(g, p),
                              weight=p.measure)
        one = CylinderFunction([(w, 1) for w in valid_words(-5, 5, 3, min_len=3)])
        g = conjugated_transfer(one, p).refine(2)
        support = [(w, v) for w, v in g if w[0] >= -3 and w[-1] <= 3 and p.measure(w) > 0]
        not_one = [w for w, v in support if v != 1]
    report(record_property, "8",
           f"adjoint defects={len(bad)} over {len(words)}^2 pairs; T_mu 1 != 1 on "
           f"{len(not_one)}/{len(support)} cylinders of {{F>0}}; {c.elapsed:.2f}s (budget 5s)")
    assert not bad and not not_one and support
    assert c.elapsed < 5


def test_criterion_09_decay(record_property):
    p = F_density("1/2")
    with Clock() as c:
        rep = exactness_decay(markov_mean_zero_example(p), p, 64)
    b0, b64 = rep.norms[0], rep.norms[64]
    report(record_property, "9",
           f"b_0={b0}, b_64={float(b64):.4g}, non-increasing={rep.is_non_increasing()}, "
           f"halving threshold is an engineering choice; {c.elapsed:.2f}s (budget 10s)")
    assert rep.is_non_increasing()
    assert b64 <= b0 / 2
    assert c.elapsed < 10


def test_criterion_10_annihilating_measure(record_property):
    q = Fraction(1, 2)
    w = (-1, 0, 1)
    with Clock() as c:
        pd = annihilating_density(w, q)
        rep = verify_annihilation_and_invariance(pd, 5)
        F = F_density(q)
        pair = non_proportionality_witness(F, pd, 5)
    exact = pair is not None and (
        F.measure(pair[0]) * pd.measure(pair[1]) != F.measure(pair[1]) * pd.measure(pair[0]))
    report(record_property, "10",
           f"mu([w])={pd.measure(w)}, invariant on {rep.checked} cylinders={rep.invariant}, "
           f"witness={pair}, {c.elapsed:.2f}s (budget 5s)")
    assert rep.annihilated and rep.invariant
    assert exact
    assert c.elapsed < 5
