"""POI selection policies.

A policy maps a score profile ``r = (r_1, r_2, ...)`` to selection
probabilities ``pi_i(r)``. Weight policies use ``pi_i = a_i r_i / K`` with
``K = sum_j a_j r_j``; cumulative policies use ``pi_i = f(P_i) - f(P_{i-1})``
where ``P_i`` is the cumulative fraction of POIs with score at most ``i``.

Every weight policy also describes the large-``i`` behaviour of its weights
through :meth:`WeightPolicy.asymptotics`, which the stationary solvers use to
decide whether ``sum_n A_n`` (with ``A_n = a_1 ... a_n``) converges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from herding.numerics import hurwitz_tail


class PolicyError(ValueError):
    pass


@dataclass(frozen=True)
class Asymptotics:
    """Weights behave like ``a_i = 1 - gamma * i**(-nu)`` for large ``i``.

    ``kind`` is ``"decaying"`` for that family, ``"unit"`` when the weights
    reach 1 after finitely many terms, and ``"unbounded"`` when they grow
    without limit.
    """

    kind: str
    gamma: float = 0.0
    nu: float = 0.0

    @property
    def cum_weights_summable(self) -> bool:
        """Whether ``sum_n A_n`` converges."""
        if self.kind != "decaying":
            return False
        return self.nu < 1.0 or (self.nu == 1.0 and self.gamma > 1.0)

    def weighted_cum_summable(self, power: int) -> bool:
        """Whether ``sum_n n**power * A_n`` converges."""
        if self.kind != "decaying":
            return False
        if self.nu < 1.0:
            return True
        return self.nu == 1.0 and self.gamma > 1.0 + power


class Policy:
    """Base class; subclasses are frozen dataclasses."""

    pointwise = True

    def probs(self, r: np.ndarray, escaped: float = 0.0) -> np.ndarray:
        raise NotImplementedError


class WeightPolicy(Policy):
    def weight(self, i: int) -> float:
        if i < 1:
            raise ValueError("scores start at 1")
        return float(self.weights(i)[-1])

    def weights(self, n: int) -> np.ndarray:
        """``(a_1, ..., a_n)``."""
        raise NotImplementedError

    def log_cum_weights(self, n: int) -> np.ndarray:
        """``(log A_0, ..., log A_n)`` with ``A_0 = 1``."""
        out = np.zeros(n + 1)
        out[1:] = np.cumsum(np.log(self.weights(n)))
        return out

    def cum_weight_product(self, n: int) -> float:
        if n < 0:
            raise ValueError("n must be non-negative")
        return float(math.exp(self.log_cum_weights(n)[-1]))

    def asymptotics(self) -> Asymptotics:
        raise NotImplementedError

    def cum_tail(self, n: int, power: int = 0) -> float:
        """Estimate of ``sum_{m > n} m**power * A_m``; ``inf`` when divergent."""
        if not self.asymptotics().weighted_cum_summable(power):
            return math.inf
        return self._cum_tail(n, power)

    def _cum_tail(self, n: int, power: int) -> float:
        raise NotImplementedError

    def probs(self, r: np.ndarray, escaped: float = 0.0) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if escaped < 0:
            raise ValueError("escaped mass must be non-negative")
        w = self.weights(len(r)) * r
        total = w.sum() + escaped
        if total <= 0.0:
            return np.zeros_like(r)
        return w / total


@dataclass(frozen=True)
class Uniform(WeightPolicy):
    def weights(self, n):
        return np.ones(n)

    def log_cum_weights(self, n):
        return np.zeros(n + 1)

    def asymptotics(self):
        return Asymptotics("unit")


@dataclass(frozen=True)
class ScoreLinear(WeightPolicy):
    """``a_i = i``; unbounded weights, never stationary."""

    def weights(self, n):
        return np.arange(1, n + 1, dtype=float)

    def asymptotics(self):
        return Asymptotics("unbounded")


@dataclass(frozen=True)
class RatioPower(WeightPolicy):
    """``a_i = (i / (i + 1))**gamma``, so ``A_n = (n + 1)**(-gamma)``."""

    gamma: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise PolicyError("gamma must be positive")

    def weights(self, n):
        i = np.arange(1, n + 1, dtype=float)
        return (i / (i + 1.0)) ** self.gamma

    def log_cum_weights(self, n):
        return -self.gamma * np.log(np.arange(1, n + 2, dtype=float))

    def asymptotics(self):
        # (i/(i+1))**g = 1 - g/i + O(1/i**2)
        return Asymptotics("decaying", self.gamma, 1.0)

    def _cum_tail(self, n, power):
        # sum_{m>n} m**p (m+1)**-g with m**p expanded around m+1
        q = n + 2.0
        if power == 0:
            return hurwitz_tail(self.gamma, q)
        if power == 1:
            return hurwitz_tail(self.gamma - 1.0, q) - hurwitz_tail(self.gamma, q)
        raise ValueError("power must be 0 or 1")


@dataclass(frozen=True)
class WeightTable(WeightPolicy):
    """Explicit weights ``a_1..a_L`` plus a rule for ``i > L``.

    Without a tail rule the last weight is repeated (and the table is scaled
    so that it equals 1). With ``tail_gamma``/``tail_nu`` the weights beyond
    the table follow ``1 - tail_gamma * i**(-tail_nu)``.
    """

    table: tuple[float, ...]
    tail_gamma: float | None = None
    tail_nu: float | None = None
    _scaled: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        table = tuple(float(a) for a in self.table)
        if not table:
            raise PolicyError("weight table is empty")
        if any(not math.isfinite(a) or a <= 0 for a in table):
            raise PolicyError("weights must be positive and finite")
        if any(b < a for a, b in zip(table, table[1:])):
            raise PolicyError("weights must be non-decreasing")
        if (self.tail_gamma is None) != (self.tail_nu is None):
            raise PolicyError("tail_gamma and tail_nu go together")
        if self.tail_gamma is None:
            table = tuple(a / table[-1] for a in table)
        else:
            if self.tail_gamma <= 0 or self.tail_nu <= 0:
                raise PolicyError("tail parameters must be positive")
            n = len(table)
            first = 1.0 - self.tail_gamma * (n + 1.0) ** (-self.tail_nu)
            if not 0.0 < first or table[-1] > first:
                raise PolicyError("tail rule must continue the table upward towards 1")
        object.__setattr__(self, "table", tuple(float(a) for a in self.table))
        object.__setattr__(self, "_scaled", table)

    def weights(self, n):
        out = np.empty(n)
        m = min(n, len(self._scaled))
        out[:m] = self._scaled[:m]
        if n > m:
            if self.tail_gamma is None:
                out[m:] = self._scaled[-1]
            else:
                i = np.arange(m + 1, n + 1, dtype=float)
                out[m:] = 1.0 - self.tail_gamma * i ** (-self.tail_nu)
        return out

    def asymptotics(self):
        if self.tail_gamma is None:
            return Asymptotics("unit")
        return Asymptotics("decaying", self.tail_gamma, self.tail_nu)

    def _cum_tail(self, n, power):
        # direct sum up to a growing horizon, closed with the leading-order tail
        g, nu = self.tail_gamma, self.tail_nu
        h = max(4 * (n + 1), 4 * len(self._scaled), 4096)
        while True:
            lca = self.log_cum_weights(h)
            m = np.arange(n + 1, h + 1, dtype=float)
            terms = m**power * np.exp(lca[n + 1:])
            total = terms.sum()
            if nu < 1.0:
                closing = terms[-1] * h**nu / (g * (1.0 - nu))
            else:
                closing = terms[-1] * h / (g - 1.0 - power)
            if closing <= 1e-15 * total or h >= 2**24:
                return total + closing
            h *= 4


@dataclass(frozen=True)
class AsymptoticClass(WeightPolicy):
    """Weights known only through ``a_i = 1 - gamma * i**(-nu) + O(i**(-nu-1))``.

    Usable for ergodicity classification only.
    """

    gamma: float
    nu: float

    def __post_init__(self):
        if self.gamma <= 0 or self.nu <= 0:
            raise PolicyError("gamma and nu must be positive")

    def weights(self, n):
        raise PolicyError("AsymptoticClass has no concrete weights")

    def asymptotics(self):
        return Asymptotics("decaying", self.gamma, self.nu)


def _power(c: float) -> Callable[[float], float]:
    return lambda x: x**c


@dataclass(frozen=True)
class CumulativeF(Policy):
    """``pi_i = f(P_i) - f(P_{i-1})`` for convex ``f`` with ``f(0)=0, f(1)=1``.

    ``df`` is the derivative of ``f``. ``exponent`` is set for the power
    family ``f(x) = x**c`` (the only family the simulator can sample).
    """

    f: Callable[[float], float]
    df: Callable[[float], float]
    exponent: float | None = None
    name: str = "custom"

    pointwise = False

    def __post_init__(self):
        check_convex(self.f, self.df)

    @classmethod
    def power(cls, c: float) -> "CumulativeF":
        if not c > 1:
            raise PolicyError("cumulative power policy needs c > 1")
        c = float(c)
        return cls(_power(c), lambda x: c * x ** (c - 1.0), exponent=c, name=f"power({c:g})")

    @property
    def slope_at_one(self) -> float:
        return float(self.df(1.0))

    def cumulative(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        total = r.sum()
        if total <= 0:
            raise ValueError("profile has zero total mass")
        p = np.minimum(np.cumsum(r) / total, 1.0)
        # exact 1 from the last occupied score on, so empty top bins get zero probability
        p[np.flatnonzero(r)[-1]:] = 1.0
        return p

    def probs(self, r: np.ndarray, escaped: float = 0.0) -> np.ndarray:
        if escaped != 0.0:
            raise PolicyError("cumulative policies do not support escaped mass")
        r = np.asarray(r, dtype=float)
        if r.sum() <= 0:
            return np.zeros_like(r)
        fp = np.asarray(self.f(self.cumulative(r)), dtype=float)
        return np.diff(fp, prepend=0.0)

    def effective_weights(self, r: np.ndarray) -> tuple[np.ndarray, float]:
        r = np.asarray(r, dtype=float)
        total = r.sum()
        p = self.cumulative(r)
        pi = self.probs(r)
        slope = self.slope_at_one
        a = np.empty_like(r)
        pos = r > 0
        a[pos] = total * pi[pos] / (slope * r[pos])
        # zero bin: right-continuous limit of the difference quotient
        a[~pos] = np.asarray(self.df(p[~pos]), dtype=float) / slope
        return a, total / slope


def check_convex(f, df, grid: int = 257) -> None:
    """Grid check that ``f`` is a valid cumulative selection function."""
    xs = np.linspace(0.0, 1.0, grid)
    ys = np.array([f(x) for x in xs], dtype=float)
    if abs(ys[0]) > 1e-12 or abs(ys[-1] - 1.0) > 1e-12:
        raise PolicyError("need f(0) = 0 and f(1) = 1")
    second = ys[2:] - 2 * ys[1:-1] + ys[:-2]
    if np.any(second < -1e-12):
        raise PolicyError("f is not convex on [0, 1]")
    if not np.any(second > 1e-12):
        raise PolicyError("f is not strictly convex")
    slope = float(df(1.0))
    if not 1.0 < slope < math.inf:
        raise PolicyError(f"need 1 < f'(1) < inf, got {slope}")


# Function-style access; thin dispatch onto the classes above.

def weight(p: Policy, i: int) -> float:
    if not isinstance(p, WeightPolicy):
        raise PolicyError("weights of a cumulative policy depend on the state")
    return p.weight(i)


def cum_weight_product(p: Policy, n: int) -> float:
    if not isinstance(p, WeightPolicy):
        raise PolicyError("weights of a cumulative policy depend on the state")
    return p.cum_weight_product(n)


def policy_probs(p: Policy, r, escaped: float = 0.0) -> np.ndarray:
    return p.probs(np.asarray(r, dtype=float), escaped)


def effective_weights_cumulative(p: CumulativeF, r) -> tuple[np.ndarray, float]:
    return p.effective_weights(np.asarray(r, dtype=float))


def from_config(block: dict) -> Policy:
    """Build a policy from its JSON config block."""
    block = dict(block)
    kind = block.pop("type", None)
    allowed = {
        "uniform": set(),
        "score_linear": set(),
        "ratio_power": {"gamma"},
        "asymptotic_class": {"gamma", "nu"},
        "weight_table": {"table", "tail_gamma", "tail_nu"},
        "cumulative_power": {"c"},
    }
    if kind not in allowed:
        raise PolicyError(f"unknown policy type {kind!r}")
    extra = set(block) - allowed[kind]
    if extra:
        raise PolicyError(f"unknown keys for {kind} policy: {sorted(extra)}")
    try:
        if kind == "uniform":
            return Uniform()
        if kind == "score_linear":
            return ScoreLinear()
        if kind == "ratio_power":
            return RatioPower(float(block["gamma"]))
        if kind == "asymptotic_class":
            return AsymptoticClass(float(block["gamma"]), float(block["nu"]))
        if kind == "weight_table":
            return WeightTable(tuple(block["table"]), block.get("tail_gamma"), block.get("tail_nu"))
        return CumulativeF.power(float(block["c"]))
    except KeyError as exc:
        raise PolicyError(f"{kind} policy needs {exc.args[0]!r}") from None


def to_config(p: Policy) -> dict:
    if isinstance(p, Uniform):
        return {"type": "uniform"}
    if isinstance(p, ScoreLinear):
        return {"type": "score_linear"}
    if isinstance(p, RatioPower):
        return {"type": "ratio_power", "gamma": p.gamma}
    if isinstance(p, AsymptoticClass):
        return {"type": "asymptotic_class", "gamma": p.gamma, "nu": p.nu}
    if isinstance(p, WeightTable):
        out = {"type": "weight_table", "table": list(p.table)}
        if p.tail_gamma is not None:
            out.update(tail_gamma=p.tail_gamma, tail_nu=p.tail_nu)
        return out
    if isinstance(p, CumulativeF) and p.exponent is not None:
        return {"type": "cumulative_power", "c": p.exponent}
    raise PolicyError(f"policy {p!r} has no config form")
