"""Finite-support probability sequences on the positive integers.

Used for the score-increment distribution (theta) and the initial-score
distribution (phi). Both carry a tail sequence ``tail(n) = sum_{k>n} d_k``
whose generating function is ``(1 - d(z)) / (1 - z)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

NORMALIZATION_TOL = 1e-12


class DistributionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ProbSeq:
    """Probability masses indexed by integer score >= 1.

    Build with :func:`make_prob_seq`; the constructor trusts its input.
    """

    scores: tuple[int, ...]
    masses: tuple[float, ...]
    _dense: np.ndarray = field(repr=False, compare=False)
    _tail: np.ndarray = field(repr=False, compare=False)

    @property
    def max_score(self) -> int:
        return self.scores[-1]

    @property
    def dense(self) -> np.ndarray:
        """Masses as an array indexed by score, entry 0 is always zero."""
        return self._dense

    @property
    def tails(self) -> np.ndarray:
        """``tails[n]`` for ``n = 0..max_score - 1``; zero beyond."""
        return self._tail

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.scores, self.masses))

    def is_unit_step(self) -> bool:
        """True for the degenerate distribution d(z) = z."""
        return self.scores == (1,)

    def __eq__(self, other):
        if not isinstance(other, ProbSeq):
            return NotImplemented
        return self.scores == other.scores and self.masses == other.masses

    def __hash__(self):
        return hash((self.scores, self.masses))


def make_prob_seq(masses: Mapping[int, float], renormalize: bool = False) -> ProbSeq:
    """Validate a ``{score: probability}`` map and build a :class:`ProbSeq`.

    Keys may be ints or decimal strings (as read from JSON). The masses must
    sum to one within 1e-12 unless ``renormalize`` is set.
    """
    if not masses:
        raise DistributionError("distribution must have at least one score")
    items = {}
    for key, value in masses.items():
        try:
            score = int(key)
        except (TypeError, ValueError):
            raise DistributionError(f"score {key!r} is not an integer") from None
        if isinstance(key, float) and key != score:
            raise DistributionError(f"score {key!r} is not an integer")
        if score < 1:
            raise DistributionError(f"score {score} < 1; mass at 0 is not allowed")
        value = float(value)
        if not math.isfinite(value) or value <= 0.0:
            raise DistributionError(f"mass at score {score} must be positive, got {value}")
        if score in items:
            raise DistributionError(f"duplicate score {score}")
        items[score] = value

    total = math.fsum(items.values())
    if renormalize:
        items = {k: v / total for k, v in items.items()}
    elif abs(total - 1.0) > NORMALIZATION_TOL:
        raise DistributionError(f"masses sum to {total!r}, not 1")
    if any(v > 1.0 for v in items.values()):
        raise DistributionError("a mass exceeds 1")

    scores = tuple(sorted(items))
    probs = tuple(items[s] for s in scores)
    dense = np.zeros(scores[-1] + 1)
    dense[list(scores)] = probs
    # tail[n] = sum_{k > n} d_k, computed from the top so it ends at exactly 0
    tail = np.cumsum(dense[::-1])[::-1][1:].copy()
    tail[0] = 1.0
    return ProbSeq(scores, probs, dense, tail)


def degenerate(score: int = 1) -> ProbSeq:
    return make_prob_seq({score: 1.0})


def gf_eval(d: ProbSeq, z: float) -> float:
    if not 0.0 <= z <= 1.0:
        raise ValueError(f"z must lie in [0, 1], got {z}")
    if z == 1.0:
        return 1.0
    return math.fsum(m * z**s for s, m in zip(d.scores, d.masses))


def tail_seq(d: ProbSeq, n: int) -> float:
    if n < 0:
        raise ValueError("n must be non-negative")
    if n >= len(d.tails):
        return 0.0
    return float(d.tails[n])


def tail_array(d: ProbSeq, length: int) -> np.ndarray:
    """First ``length`` tail sums, zero padded."""
    out = np.zeros(length)
    m = min(length, len(d.tails))
    out[:m] = d.tails[:m]
    return out


def moment1(d: ProbSeq) -> float:
    return math.fsum(s * m for s, m in zip(d.scores, d.masses))


def moment2_factorial(d: ProbSeq) -> float:
    return math.fsum(s * (s - 1) * m for s, m in zip(d.scores, d.masses))
