from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from acim.core import (
    GridDensity,
    ShapeError,
    TruncationPolicy,
    format_rational,
    l1_distance,
    parse_rational,
    truncated_series,
)

rationals = st.fractions(max_denominator=50).filter(lambda x: abs(x) < 100)


def test_parse_and_format_roundtrip():
    assert parse_rational("3/6") == Fraction(1, 2)
    assert parse_rational("-4") == -4
    assert format_rational(Fraction(2, 4)) == "1/2"
    with pytest.raises(ValueError):
        parse_rational("0.5")
    with pytest.raises(ValueError):
        parse_rational("1/0")


@given(rationals, rationals, rationals)
def test_exact_arithmetic_identities(a, b, c):
    assert (a + b) + c == a + (b + c)
    assert a * b == b * a
    assert a * (b + c) == a * b + a * c
    if b:
        assert (a / b) * b == a
    assert (a + b).denominator > 0


def test_l1_distance_examples():
    one = GridDensity.constant(1.0, 4)
    zero = GridDensity.constant(0.0, 4)
    assert l1_distance(one, one) == 0
    assert l1_distance(one, zero) == 1
    f = GridDensity(0.0, 1.0, [1, 0, 0, 0])
    g = GridDensity(0.0, 1.0, [0, 1, 0, 0])
    assert l1_distance(f, g) == 0.5


def test_l1_distance_ignores_escaped_mass():
    f = GridDensity(0.0, 1.0, [1, 2], escaped_mass=5.0)
    assert l1_distance(f, f.with_values(f.values, escaped_mass=0.0)) == 0


def test_l1_distance_grid_mismatch():
    with pytest.raises(ShapeError):
        l1_distance(GridDensity.constant(1, 4), GridDensity.constant(1, 5))


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1))
def test_l1_is_a_metric(seed):
    rng = np.random.default_rng(seed)
    f, g, h = (GridDensity(0.0, 1.0, rng.random(16)) for _ in range(3))
    assert l1_distance(f, g) == pytest.approx(l1_distance(g, f), abs=0)
    assert l1_distance(f, h) <= l1_distance(f, g) + l1_distance(g, h) + 1e-15


def test_indicator_cell_averages():
    g = GridDensity.indicator(0.3, 0.6, 10)
    assert g.grid_mass() == pytest.approx(0.3, abs=1e-15)
    assert g.values[2] == pytest.approx(0.0, abs=1e-12)
    assert g.values[3] == pytest.approx(1.0)
    assert g.value_at(0.35) == pytest.approx(1.0)
    assert g.value_at(1.5) == 0.0


def test_cell_index_half_open_cells():
    g = GridDensity.constant(1.0, 4)
    assert g.cell_index(0.25) == 0
    assert g.cell_index(0.2500001) == 1
    assert g.cell_index(1.0) == 3


def test_series_of_zeros():
    zero = GridDensity.constant(0.0, 8)
    total, rep = truncated_series(lambda n: zero, TruncationPolicy(10, 1e-6))
    assert np.all(total.values == 0)
    assert rep.terms_used == 1 and rep.converged


def test_geometric_series():
    # oracle: sum of (1/2)^n is 2; truncation error is the tail 2^-N
    total, rep = truncated_series(lambda n: GridDensity.constant(0.5**n, 8),
                                  TruncationPolicy(200, 1e-6))
    assert rep.converged
    assert np.max(np.abs(total.values - 2.0)) <= 2e-6
    assert rep.last_term_norm <= 1e-6


def test_forced_nonconvergence():
    total, rep = truncated_series(lambda n: GridDensity.constant(1.0, 8),
                                  TruncationPolicy(10, 1e-6))
    assert not rep.converged
    assert rep.terms_used == 10
    assert np.all(total.values == 10)


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1))
def test_partial_sums_monotone(seed):
    rng = np.random.default_rng(seed)
    terms = [GridDensity(0.0, 1.0, rng.random(6) * 0.5**n) for n in range(12)]
    prev = np.zeros(6)
    for N in range(1, 12):
        total, _ = truncated_series(lambda n: terms[n], TruncationPolicy(N, 1e-300))
        assert np.all(total.values >= prev)
        prev = total.values


def test_policy_validation():
    with pytest.raises(ValueError):
        TruncationPolicy(0, 1e-6)
    with pytest.raises(ValueError):
        TruncationPolicy(5, 0.0)
