"""Exact computations for the one-sided shift of the monotone walk on Z.

The walk stays put with probability ``1 - q`` and steps up by one with
probability ``q``.  The reference measure gives every one-letter cylinder
mass 1, so ``m([a_1,...,a_k]) = prod p(a_j, a_{j+1})`` and ``m`` is infinite
but shift-invariant.  All values are ``Fraction``; nothing here rounds.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .core import parse_rational

Word = tuple[int, ...]


@dataclass(frozen=True)
class JumpParameter:
    q: Fraction

    def __post_init__(self):
        q = parse_rational(self.q)
        object.__setattr__(self, "q", q)
        if not 0 < q < 1:
            raise ValueError(f"jump parameter must lie in (0, 1), got {q}")

    @property
    def stay(self) -> Fraction:
        return 1 - self.q

    def transition(self, s: int, t: int) -> Fraction:
        if t == s:
            return 1 - self.q
        if t == s + 1:
            return self.q
        return Fraction(0)


def as_jump(q) -> JumpParameter:
    return q if isinstance(q, JumpParameter) else JumpParameter(q)


@dataclass(frozen=True)
class CylinderWord:
    letters: Word

    def __post_init__(self):
        letters = tuple(int(a) for a in self.letters)
        if not letters:
            raise ValueError("cylinder words are nonempty")
        object.__setattr__(self, "letters", letters)

    @property
    def valid(self) -> bool:
        return is_valid(self.letters)

    def __len__(self):
        return len(self.letters)

    def __iter__(self):
        return iter(self.letters)

    def __getitem__(self, i):
        return self.letters[i]


def as_word(w) -> Word:
    if isinstance(w, CylinderWord):
        return w.letters
    word = tuple(int(a) for a in w)
    if not word:
        raise ValueError("cylinder words are nonempty")
    return word


def is_valid(w: Sequence[int]) -> bool:
    return all(b - a in (0, 1) for a, b in zip(w, w[1:]))


def runs(w: Sequence[int]) -> list[tuple[int, int]]:
    """Run-length encoding ``[(letter, count), ...]`` of a word."""
    return [(a, len(list(g))) for a, g in itertools.groupby(w)]


def merge(u: Word, v: Word) -> Word | None:
    """Word describing ``[u] & [v]``, or None when the cylinders are disjoint."""
    if len(u) < len(v):
        u, v = v, u
    return u if u[: len(v)] == v else None


def cylinder_measure(w, q) -> Fraction:
    w = as_word(w)
    jp = as_jump(q)
    out = Fraction(1)
    for a, b in zip(w, w[1:]):
        p = jp.transition(a, b)
        if not p:
            return Fraction(0)
        out *= p
    return out


def valid_words(lo: int, hi: int, max_len: int, min_len: int = 1) -> Iterator[Word]:
    """All valid words with letters in ``[lo, hi]`` and length in ``[min_len, max_len]``."""
    frontier = [(a,) for a in range(lo, hi + 1)]
    for length in range(1, max_len + 1):
        if length >= min_len:
            yield from frontier
        frontier = [w + (w[-1] + d,) for w in frontier for d in (0, 1) if w[-1] + d <= hi]


def extensions(w: Word, length: int) -> Iterator[Word]:
    """Valid extensions of ``w`` to ``length`` letters (``w`` itself if long enough)."""
    if len(w) >= length:
        yield w
        return
    for steps in itertools.product((0, 1), repeat=length - len(w)):
        tail, a = [], w[-1]
        for d in steps:
            a += d
            tail.append(a)
        yield w + tuple(tail)


# ---------------------------------------------------------------------------
# the explicit invariant density


@dataclass(frozen=True)
class PrefixClass:
    first_letter: int
    last_letter: int
    visible_zero_count: int
    zero_block_closed: bool


def prefix_class(w) -> PrefixClass:
    w = as_word(w)
    zeros = w.count(0)
    closed = any(a == 0 and b == 1 for a, b in zip(w, w[1:]))
    return PrefixClass(w[0], w[-1], zeros, closed)


def _as_prefix(prefix) -> PrefixClass:
    return prefix if isinstance(prefix, PrefixClass) else prefix_class(prefix)


def explicit_F(prefix, q) -> Fraction | None:
    """Value of the explicit density on a cylinder, or None if it depends on unseen letters.

    The density is 0 when the path visits 0 more than once, 1 when it visits 0
    exactly once having started below 0, and ``q`` otherwise.
    """
    c = _as_prefix(prefix)
    q = as_jump(q).q
    if c.visible_zero_count > 1:
        return Fraction(0)
    if c.visible_zero_count == 1 and c.zero_block_closed:
        if c.first_letter < 0:
            return Fraction(1)
        return q
    if c.first_letter > 0:
        return q
    return None


def conditional_F_expectation(w, q) -> Fraction:
    """``E_m[F | [w]]``; zero on null cylinders."""
    w = as_word(w)
    if not is_valid(w):
        return Fraction(0)
    q = as_jump(q).q
    c = prefix_class(w)
    v = explicit_F(c, q)
    if v is not None:
        return v
    if c.last_letter < 0:
        # the walk reaches 0 from -1 and leaves after one step w.p. q
        return q
    # last letter is the only zero and the block is still open
    return q * (1 if c.first_letter < 0 else q)


# ---------------------------------------------------------------------------
# block-length law of the walk given a visible prefix


def _block_laws(y: Word, two_sided: bool) -> Callable[[int], tuple[str, int]]:
    """Map each letter to the law of its block length given the prefix ``y``.

    Laws: ``("free", 0)`` geometric on {1,2,...}; ``("fixed", c)``;
    ``("c+g", c)`` c plus one geometric on {0,1,...}; ``("c+2g", c)`` c plus two
    independent such geometrics.  The past of a two-sided path is the time
    reversal of the walk, which steps down with probability q.
    """
    rs = runs(y)
    first, c_first = rs[0]
    last, c_last = rs[-1]
    counts = dict(rs)

    def law(t: int) -> tuple[str, int]:
        if t < first:
            return ("free", 0) if two_sided else ("fixed", 0)
        if t > last:
            return ("free", 0)
        if len(rs) == 1:
            return ("c+2g", c_first) if two_sided else ("c+g", c_first)
        if t == first:
            return ("c+g", c_first) if two_sided else ("fixed", c_first)
        if t == last:
            return ("c+g", c_last)
        return ("fixed", counts[t])

    return law


def _prob_eq(law: tuple[str, int], m: int, q: Fraction) -> Fraction:
    kind, c = law
    r = 1 - q
    if kind == "fixed":
        return Fraction(int(c == m))
    if kind == "free":
        return q * r ** (m - 1) if m >= 1 else Fraction(0)
    if m < c:
        return Fraction(0)
    if kind == "c+g":
        return q * r ** (m - c)
    return (m - c + 1) * q * q * r ** (m - c)


def _prob_ge(law: tuple[str, int], ell: int, q: Fraction) -> Fraction:
    kind, c = law
    r = 1 - q
    if kind == "fixed":
        return Fraction(int(c >= ell))
    if kind == "free":
        return Fraction(1) if ell <= 1 else r ** (ell - 1)
    if ell <= c:
        return Fraction(1)
    if kind == "c+g":
        return r ** (ell - c)
    return 1 - sum(((j + 1) * q * q * r**j for j in range(ell - c)), Fraction(0))


def pattern_probability(pattern, y, q, two_sided: bool = True) -> Fraction:
    """Probability that the path contains ``pattern`` consecutively, given it starts with ``y``.

    With ``two_sided`` the path is extended into the past by the reversed walk
    (the natural extension); otherwise only the forward coordinates count.
    """
    pattern, y = as_word(pattern), as_word(y)
    q = as_jump(q).q
    if not is_valid(pattern) or not is_valid(y):
        return Fraction(0)
    law = _block_laws(y, two_sided)
    prs = runs(pattern)
    if len(prs) == 1:
        a, ell = prs[0]
        return _prob_ge(law(a), ell, q)
    out = Fraction(1)
    for i, (t, count) in enumerate(prs):
        if i == 0 or i == len(prs) - 1:
            out *= _prob_ge(law(t), count, q)
        else:
            out *= _prob_eq(law(t), count, q)
        if not out:
            break
    return out


# ---------------------------------------------------------------------------
# densities on the shift and their measures


class ShiftDensity:
    """A nonnegative function on the shift space known through cylinder averages.

    ``expectation(w)`` is ``E_m[p | [w]]``.  ``memory`` is the number of
    leading letters that determine the ratio ``p(x) / p(Tx)``; the ratio is
    what lets the conjugated transfer operator stay inside the cylinder
    algebra.
    """

    def __init__(self, q, expectation: Callable, memory: int = 2, name: str = ""):
        self.q = as_jump(q)
        self._expectation = lru_cache(maxsize=None)(expectation)
        self.memory = memory
        self.name = name

    def expectation(self, w) -> Fraction:
        return self._expectation(as_word(w))

    def measure(self, w) -> Fraction:
        w = as_word(w)
        m = cylinder_measure(w, self.q)
        return m * self.expectation(w) if m else Fraction(0)

    def cocycle(self, u: Word) -> Fraction:
        """``p(x) / p(Tx)`` on ``[u]`` for a word of length ``memory``."""
        if len(u) < 2:
            raise ValueError("cocycle words need at least two letters")
        den = self.expectation(u[1:])
        if not den:
            return Fraction(0)
        return self.expectation(u) / den

    def perturbed(self, word, delta) -> ShiftDensity:
        """``p + delta * 1_[word]``; used to check that the invariance test bites."""
        word = as_word(word)
        delta = Fraction(delta)
        base = self.expectation

        def expectation(w):
            w = as_word(w)
            both = merge(w, word)
            if both is None:
                return base(w)
            m = cylinder_measure(w, self.q)
            if not m:
                return Fraction(0)
            return base(w) + delta * cylinder_measure(both, self.q) / m

        return ShiftDensity(self.q, expectation, max(self.memory, len(word) + 1),
                            f"{self.name}+perturbation")

    def __repr__(self):
        return f"ShiftDensity({self.name or '?'}, q={self.q.q}, memory={self.memory})"


def lebesgue_density(q) -> ShiftDensity:
    return ShiftDensity(q, lambda w: Fraction(1), memory=2, name="m")


def F_density(q) -> ShiftDensity:
    jp = as_jump(q)
    return ShiftDensity(jp, lambda w: conditional_F_expectation(w, jp), memory=2, name="F")


def verify_cocycle(density: ShiftDensity, lo: int, hi: int, max_len: int) -> list[Word]:
    """Words ``(s,)+v`` where ``E[p|(s,)+v] != R * E[p|v]``; empty means consistent."""
    L = density.memory
    bad = []
    for v in valid_words(lo, hi, max_len - 1, min_len=max(L - 1, 1)):
        for s in (v[0] - 1, v[0]):
            w = (s,) + v
            lhs = density.expectation(w)
            rhs = density.cocycle(w[:L]) * density.expectation(v)
            if lhs != rhs:
                bad.append(w)
    return bad


# ---------------------------------------------------------------------------
# cylinder functions and the transfer operator


class CylinderFunction:
    """Finite combination ``sum c_w 1_[w]`` with exact coefficients."""

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        acc: dict[Word, Fraction] = {}
        items = terms.items() if isinstance(terms, dict) else (terms or ())
        for w, c in items:
            w = as_word(w)
            acc[w] = acc.get(w, Fraction(0)) + Fraction(c)
        self.terms = {w: c for w, c in acc.items() if c}

    @classmethod
    def indicator(cls, w, coefficient=1) -> CylinderFunction:
        return cls({as_word(w): coefficient})

    def __iter__(self):
        return iter(self.terms.items())

    def __len__(self):
        return len(self.terms)

    def __bool__(self):
        return bool(self.terms)

    def __eq__(self, other):
        return isinstance(other, CylinderFunction) and self.terms == other.terms

    def __repr__(self):
        body = " + ".join(f"{c}*1{list(w)}" for w, c in sorted(self.terms.items()))
        return f"CylinderFunction({body or '0'})"

    def __add__(self, other: CylinderFunction) -> CylinderFunction:
        return CylinderFunction(itertools.chain(self.terms.items(), other.terms.items()))

    def __neg__(self):
        return CylinderFunction({w: -c for w, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c) -> CylinderFunction:
        c = Fraction(c)
        return CylinderFunction({w: c * v for w, v in self.terms.items()})

    __rmul__ = scale

    def times(self, other: CylinderFunction) -> CylinderFunction:
        """Pointwise product; indicator products are indicators of merged words."""
        out = []
        for w, c in self.terms.items():
            for v, d in other.terms.items():
                u = merge(w, v)
                if u is not None:
                    out.append((u, c * d))
        return CylinderFunction(out)

    def max_length(self) -> int:
        return max((len(w) for w in self.terms), default=1)

    def refine(self, length: int | None = None) -> CylinderFunction:
        """Rewrite on valid words of one common length; the words are then disjoint.

        Invalid words carry zero mass for every measure used here and are
        dropped.
        """
        length = self.max_length() if length is None else length
        out = []
        for w, c in self.terms.items():
            if not is_valid(w):
                continue
            out.extend((u, c) for u in extensions(w, length))
        g = CylinderFunction(out)
        if any(len(w) != length for w in g.terms):
            return g.refine(g.max_length())
        return g

    def integrate(self, a, weight: Callable[[Word], Fraction]) -> Fraction:
        """``sum c_w * weight([a] & [w])``; ``weight`` is a cylinder measure."""
        a = as_word(a)
        out = Fraction(0)
        for w, c in self.terms.items():
            u = merge(a, w)
            if u is not None:
                out += c * weight(u)
        return out

    def total(self, weight) -> Fraction:
        return sum((c * weight(w) for w, c in self.terms.items()), Fraction(0))

    def l1_norm(self, weight) -> Fraction:
        return sum((abs(c) * weight(w) for w, c in self.refine().terms.items()), Fraction(0))


def transfer_cylinder(f: CylinderFunction, q) -> CylinderFunction:
    """Transfer operator of the shift with respect to ``m`` on cylinder functions."""
    jp = as_jump(q)
    out = []
    for w, c in f:
        if len(w) >= 2:
            p = jp.transition(w[0], w[1])
            if p:
                out.append((w[1:], c * p))
        else:
            out.append((w, c * jp.stay))
            out.append(((w[0] + 1,), c * jp.q))
    return CylinderFunction(out)


def pullback_cylinder_measure(f: CylinderFunction, a, weight) -> Fraction:
    """``integral over T^-1[a] of f``: on ``[w]`` the preimage is ``[w] & [w_1, a]``."""
    a = as_word(a)
    out = Fraction(0)
    for w, c in f:
        u = merge(w, (w[0],) + a)
        if u is not None:
            out += c * weight(u)
    return out


def adjoint_defects(fs: Iterable[CylinderFunction], tests: Iterable, q,
                    transfer=None, weight=None) -> list[tuple]:
    """Pairs ``(f, a, lhs, rhs)`` where the defining adjoint identity fails."""
    jp = as_jump(q)
    weight = weight or (lambda w: cylinder_measure(w, jp))
    transfer = transfer or (lambda g: transfer_cylinder(g, jp))
    tests = [as_word(a) for a in tests]
    bad = []
    for f in fs:
        tf = transfer(f)
        for a in tests:
            lhs = tf.integrate(a, weight)
            rhs = pullback_cylinder_measure(f, a, weight)
            if lhs != rhs:
                bad.append((f, a, lhs, rhs))
    return bad


# ---------------------------------------------------------------------------
# invariance and the series identity


@dataclass
class InvarianceReport:
    ok: bool
    checked: int
    defects: list[tuple[Word, Fraction, Fraction]]

    def as_dict(self) -> dict:
        from .core import format_rational

        return {
            "ok": self.ok,
            "checked": self.checked,
            "defects": [
                {"word": list(w), "pullback": format_rational(l), "direct": format_rational(r)}
                for w, l, r in self.defects
            ],
        }


def invariance_check(max_len: int, letter_range: tuple[int, int], q,
                     density: ShiftDensity | None = None) -> InvarianceReport:
    """Exact check of ``mu(T^-1[a]) == mu([a])`` over all valid cylinders in the window.

    ``T^-1[a]`` is the union of ``[s, a]`` over ``s``; only ``s = a_1 - 1`` and
    ``s = a_1`` carry mass.  The prepended letter may leave the window.
    """
    if max_len < 1:
        raise ValueError("max_len must be at least 1")
    jp = as_jump(q)
    density = density or F_density(jp)
    lo, hi = letter_range
    defects, checked = [], 0
    for a in valid_words(lo, hi, max_len):
        lhs = density.measure((a[0] - 1,) + a) + density.measure((a[0],) + a)
        rhs = density.measure(a)
        checked += 1
        if lhs != rhs:
            defects.append((a, lhs, rhs))
    return InvarianceReport(not defects, checked, defects)


F_PATTERN = (-1, 0, 1)


def remark1_identity(prefix, q) -> tuple[Fraction, Fraction]:
    """Both sides of the series representation of F, averaged over ``[prefix]``.

    lhs: probability that ``(-1, 0, 1)`` occurs in the forward path, plus the
    transfer-iterate series.  That series is ``q 1_[0,1]`` at the first step;
    from then on it is ``q^2`` times the Green function of the walk started at
    1, which is ``1/q`` on every site ``>= 1``.
    rhs: the explicit density (or its cylinder average where undetermined).
    """
    w = as_word(prefix)
    jp = as_jump(q)
    q = jp.q
    first_series = pattern_probability(F_PATTERN, w, jp, two_sided=False)
    if w[0] == 0:
        p01 = (Fraction(int(w[1] == 1)) if len(w) > 1 else q)
    else:
        p01 = Fraction(0)
    second_series = q * p01 + (q if w[0] >= 1 else 0)
    lhs = first_series + second_series
    v = explicit_F(prefix_class(w), jp)
    rhs = v if v is not None else conditional_F_expectation(w, jp)
    return lhs, rhs


# ---------------------------------------------------------------------------
# simulation


def simulate_trajectory(q, start: int, length: int, seed: int) -> CylinderWord:
    """Sample a path of the walk.

    Steps are drawn as ``integers(0, den) < num`` so the step probability is
    exactly the rational ``q``.  Uses numpy's PCG64 seeded directly; callers
    needing several independent streams should spawn from
    ``numpy.random.SeedSequence(seed)``.
    """
    if length < 1:
        raise ValueError("length must be at least 1")
    jp = as_jump(q)
    rng = np.random.default_rng(seed)
    steps = rng.integers(0, jp.q.denominator, size=length - 1) < jp.q.numerator
    path = start + np.concatenate([[0], np.cumsum(steps, dtype=np.int64)])
    return CylinderWord(tuple(int(a) for a in path))


def zd_walk_return_estimate(d: int, steps: int, samples: int, seed: int) -> float:
    """Monte Carlo mean number of visits to the origin at times ``1..steps``.

    Simple symmetric walk on Z^d.
    """
    if not 1 <= d <= 4:
        raise ValueError("dimension must be in 1..4")
    if samples < 1:
        raise ValueError("samples must be positive")
    if steps <= 0:
        return 0.0
    rng = np.random.default_rng(seed)
    pos = np.zeros((samples, d), dtype=np.int64)
    visits = np.zeros(samples, dtype=np.int64)
    rows = np.arange(samples)
    chunk = 256
    for t0 in range(0, steps, chunk):
        n = min(chunk, steps - t0)
        axes = rng.integers(0, d, size=(n, samples))
        signs = rng.integers(0, 2, size=(n, samples)) * 2 - 1
        for axis, sign in zip(axes, signs):
            pos[rows, axis] += sign
            visits += ~pos.any(axis=1)
    return float(visits.mean())
