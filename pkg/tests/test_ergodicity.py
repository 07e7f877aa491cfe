import csv
from fractions import Fraction
from math import comb

import numpy as np
import pytest

from acim.core import GridDensity, PreconditionError, ShapeError, TruncationPolicy
from acim.ergodicity import (
    conjugated_transfer,
    ergodic_average_decay,
    exactness_decay,
    markov_mean_zero_example,
)
from acim.interval_maps import invariant_density_series
from acim.markov_shift import (
    CylinderFunction,
    F_density,
    adjoint_defects,
    lebesgue_density,
    transfer_cylinder,
    valid_words,
)


def binomial_decay(q, n):
    """``q^2 sum_t |P^n(1,t) - P^n(2,t)|``: u = q(1_[1] - 1_[2]) lives where F = q."""
    pmf = [comb(n, k) * q**k * (1 - q) ** (n - k) for k in range(n + 1)]
    diff = [a - b for a, b in zip(pmf + [0], [0] + pmf)]
    return q * q * sum(abs(d) for d in diff)


def test_mean_zero_example():
    p = F_density("1/2")
    u = markov_mean_zero_example(p)
    assert u.total(p.measure) == 0
    assert dict(u.terms) == {(1,): Fraction(1, 2), (2,): Fraction(-1, 2)}


@pytest.mark.parametrize("q", [Fraction(1, 2), Fraction(1, 3)])
def test_decay_matches_binomial_closed_form(q):
    p = F_density(q)
    rep = exactness_decay(markov_mean_zero_example(p), p, 20)
    assert rep.norms == [binomial_decay(q, n) for n in range(21)]


def test_decay_values_at_half():
    p = F_density("1/2")
    rep = exactness_decay(markov_mean_zero_example(p), p, 64)
    assert rep.norms[0] == Fraction(1, 2)
    assert rep.norms[1] == Fraction(1, 4)
    assert rep.is_non_increasing()
    assert rep.norms[64] <= rep.norms[0] / 2


def test_decay_agrees_with_plain_transfer():
    # u lives on letters >= 1 where F is the constant q, so T_mu^n u = T_m^n u exactly
    q = Fraction(1, 2)
    p = F_density(q)
    u = markov_mean_zero_example(p)
    g = u
    for n in range(1, 9):
        g = conjugated_transfer(g, p)
        direct = transfer_cylinder(u, q)
        for _ in range(n - 1):
            direct = transfer_cylinder(direct, q)
        assert g.refine(1) == direct.refine(1)


def test_non_mean_zero_rejected():
    p = F_density("1/2")
    with pytest.raises(PreconditionError):
        exactness_decay(CylinderFunction.indicator((1,)), p, 3)


def test_lebesgue_conjugation_is_plain_transfer():
    p = lebesgue_density("1/3")
    f = CylinderFunction([((0, 1), 2), ((1,), -1)])
    assert conjugated_transfer(f, p).refine() == transfer_cylinder(f, "1/3").refine()


def test_conjugated_adjoint_identity():
    p = F_density("1/2")
    words = list(valid_words(-3, 3, 4))
    fs = [CylinderFunction.indicator(w) for w in words]
    bad = adjoint_defects(fs, words, p.q, transfer=lambda g: conjugated_transfer(g, p),
                          weight=p.measure)
    assert bad == []


@pytest.mark.parametrize("q", [Fraction(1, 2), Fraction(1, 3)])
def test_conjugated_transfer_fixes_one(q):
    p = F_density(q)
    one = CylinderFunction([(w, 1) for w in valid_words(-5, 5, 3, min_len=3)])
    g = conjugated_transfer(one, p).refine(2)
    checked = 0
    for w, c in g:
        if w[0] >= -3 and w[-1] <= 3 and p.measure(w) > 0:
            assert c == 1, w
            checked += 1
    assert checked > 10


def test_ergodic_average():
    p = F_density("1/2")
    u = markov_mean_zero_example(p)
    rep = ergodic_average_decay(u, p, 16)
    assert rep.norms[0] == Fraction(1, 2)
    plain = exactness_decay(u, p, 15).norms
    for n, a in rep.indexed():
        assert a <= sum(plain[:n]) / n


def test_decay_csv(tmp_path):
    p = F_density("1/2")
    rep = exactness_decay(markov_mean_zero_example(p), p, 3)
    rep.to_csv(tmp_path / "d.csv")
    rows = list(csv.reader(open(tmp_path / "d.csv")))
    assert rows[0] == ["n", "norm"]
    assert rows[1] == ["0", "1/2"] and rows[2] == ["1", "1/4"]


# -- grid case --------------------------------------------------------------

@pytest.fixture(scope="module")
def engel_density():
    f = GridDensity.indicator(0.5, 1.0, 512)
    return invariant_density_series(f, TruncationPolicy(200, 1e-6)).density


def test_grid_conjugated_contraction(engel_density):
    p = engel_density
    x = p.midpoints()
    pos, neg = x > 0.75, (x > 0.5) & (x <= 0.75)
    # weights chosen so the mu-integral vanishes
    vals = pos * 1.0 - neg * (np.sum(p.values[pos]) / np.sum(p.values[neg]))
    u = p.with_values(vals)
    rep = exactness_decay(u, p, 10)
    assert all(b <= a + 1e-12 for a, b in zip(rep.norms, rep.norms[1:]))
    assert len(rep.masked_mass) == 10


def test_grid_mismatch(engel_density):
    with pytest.raises(ShapeError):
        conjugated_transfer(GridDensity.constant(1.0, 16), engel_density)


def test_grid_mean_zero_required(engel_density):
    with pytest.raises(PreconditionError):
        exactness_decay(engel_density.with_values(np.ones(512)), engel_density, 2)
