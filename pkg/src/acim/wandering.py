"""Wandering sets and invariant measures that annihilate them.

For the monotone walk every path is nondecreasing, which makes wandering
cylinders easy to certify.  Given a wandering cylinder ``[w]``, the set of
two-sided paths that never contain ``w`` is invariant under the two-sided
shift; projecting it gives the density ``1 - P(w occurs | forward letters)``,
which vanishes on ``[w]``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .core import PreconditionError
from .markov_shift import (
    ShiftDensity,
    Word,
    as_jump,
    as_word,
    invariance_check,
    is_valid,
    pattern_probability,
    runs,
    valid_words,
)


@dataclass
class WanderingCertificate:
    descriptor: object  # word tuple or (lo, hi) interval
    horizon: int | None  # None: every n >= 1
    verified: bool
    method: str  # "combinatorial" or "sampled"
    witness: dict | None = None
    note: str = ""

    def as_dict(self) -> dict:
        kind = "interval" if self.method == "sampled" else "cylinder"
        return {
            "set": {"kind": kind, "value": list(self.descriptor)},
            "horizon": "all" if self.horizon is None else self.horizon,
            "method": self.method,
            "verified": self.verified,
            "witness": self.witness,
            "note": self.note,
        }


def certify_wandering_cylinder(w, q=None) -> WanderingCertificate:
    """Decide whether ``[w]`` is wandering, for every ``n >= 1`` at once.

    A second occurrence of ``w`` at position ``n+1`` must start with ``w_1``.
    If ``w`` is not constant its last letter exceeds ``w_1`` and paths never
    decrease, so that start has to lie inside the first run of ``w``, where
    the copy would need a longer first run.  Constant words recur after one
    step.
    """
    w = as_word(w)
    if not is_valid(w):
        return WanderingCertificate(w, None, True, "combinatorial",
                                    note="null cylinder: forbidden transition")
    if len(runs(w)) == 1:
        return WanderingCertificate(
            w, None, False, "combinatorial",
            witness={"n": 1, "word": list(w + (w[0],))},
            note="constant word reappears after one step",
        )
    return WanderingCertificate(w, None, True, "combinatorial",
                                note="letters increase along the word")


def recurrence_witness(w, horizon: int) -> tuple[int, Word] | None:
    """Brute force: a valid path with ``w`` at positions 1 and ``n+1``, ``n <= horizon``."""
    w = as_word(w)
    k = len(w)
    if not is_valid(w):
        return None
    for n in range(1, horizon + 1):
        for steps in itertools.product((0, 1), repeat=n + k - 1):
            path = tuple(itertools.accumulate(steps, initial=w[0]))
            if path[:k] == w and path[n:n + k] == w:
                return n, path
    return None


def certify_wandering_interval(lo: float, hi: float, horizon: int, samples: int = 4096,
                               transform=None) -> WanderingCertificate:
    """Sampled finite-horizon check that no orbit from ``(lo, hi]`` returns to it.

    This is evidence, not a proof: only the sample points are followed.
    """
    from .interval_maps import engel_apply_array

    transform = transform or engel_apply_array
    frac = (np.arange(samples) * (math.sqrt(5) - 1) / 2) % 1.0
    x = lo + (hi - lo) * (np.arange(samples) + frac) / samples
    x = x[(x > lo) & (x <= hi)]
    y = x.copy()
    for n in range(1, horizon + 1):
        y = transform(y)
        back = (y > lo) & (y <= hi)
        if back.any():
            i = int(np.argmax(back))
            return WanderingCertificate(
                (lo, hi), horizon, False, "sampled",
                witness={"n": n, "x": float(x[i])},
                note="sample orbit returned",
            )
    return WanderingCertificate((lo, hi), horizon, True, "sampled",
                                note=f"{x.size} sample orbits, finite horizon; not a proof")


class PatternDensity(ShiftDensity):
    """``1 - P(pattern occurs in the two-sided path | forward letters)``."""

    def __init__(self, pattern, q):
        self.pattern = as_word(pattern)
        jp = as_jump(q)
        pat = self.pattern
        super().__init__(
            jp,
            lambda y: 1 - pattern_probability(pat, y, jp, two_sided=True),
            memory=len(pat) + 1,
            name=f"avoid{list(pat)}",
        )

    def occurrence(self) -> ShiftDensity:
        """The complementary density ``P(pattern occurs | forward letters)``."""
        pat, jp = self.pattern, self.q
        return ShiftDensity(jp, lambda y: pattern_probability(pat, y, jp, two_sided=True),
                            memory=self.memory, name=f"occur{list(pat)}")


def annihilating_density(w, q) -> PatternDensity:
    cert = certify_wandering_cylinder(w, q)
    if not cert.verified:
        raise PreconditionError(f"[{list(as_word(w))}] is not wandering: {cert.witness}")
    return PatternDensity(w, q)


@dataclass
class AnnihilationReport:
    annihilated: bool
    invariant: bool
    checked: int
    defects: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.annihilated and self.invariant

    def __bool__(self):
        return self.ok

    def as_dict(self) -> dict:
        return {"annihilated": self.annihilated, "invariant": self.invariant,
                "checked": self.checked, "defects": self.defects}


def verify_annihilation_and_invariance(pd: ShiftDensity, max_len: int,
                                       letter_range: tuple[int, int] = (-3, 3),
                                       pattern=None) -> AnnihilationReport:
    pattern = as_word(pattern if pattern is not None else pd.pattern)
    annihilated = pd.measure(pattern) == 0
    inv = invariance_check(max_len, letter_range, pd.q, density=pd)
    return AnnihilationReport(annihilated, inv.ok, inv.checked,
                              inv.as_dict()["defects"])


def non_proportionality_witness(d1: ShiftDensity, d2: ShiftDensity, max_len: int,
                                letter_range: tuple[int, int] = (-3, 3)):
    """Cylinders ``A, B`` with ``mu1(A) mu2(B) != mu1(B) mu2(A)``, or None."""
    lo, hi = letter_range
    words = list(valid_words(lo, hi, max_len))
    first = None
    for a in words:
        m1, m2 = d1.measure(a), d2.measure(a)
        if not (m1 or m2):
            continue
        if first is None:
            first = (a, m1, m2)
            continue
        b, n1, n2 = first
        if m1 * n2 != n1 * m2:
            return b, a
    return None

