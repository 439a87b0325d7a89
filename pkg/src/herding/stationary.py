"""Stationary regimes of the mean-field dynamics.

For a weight policy the stationary profile solves

    r_{n+1} = x * sum_{i<n} Theta_i a_{n-i} r_{n-i} + (lam/mu) * Phi_n,

with ``x = alpha / (mu K)`` and ``K = sum_i a_i r_i``. Writing the profile
as ``(lam/mu) * s(x)`` turns the self-consistency condition into the scalar
equation ``alpha/lam = G(x) = x * sum_i a_i s_i(x)``. When scores move up by
exactly one per visit, ``G`` is the power series ``F(x) = sum_k u_k x**k``
with ``u_k = sum_j A_{j+k} Phi_j / A_j``.

If ``alpha/lam`` exceeds the largest value ``G`` can reach, no proper
stationary profile exists and part of the POI population escapes to
infinite score (condensation). The condensed branch follows the continuity
ansatz: ``x`` sits at the radius of convergence of ``G``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from herding import _kernels
from herding.distributions import ProbSeq, moment1, moment2_factorial, tail_array
from herding.meanfield import ModelParams
from herding.numerics import bisect_increasing
from herding.policies import (
    AsymptoticClass,
    CumulativeF,
    Policy,
    PolicyError,
    WeightPolicy,
)

ERGODIC = "Ergodic"
CONDENSED = "Condensed"
UNBOUNDED = "NonErgodicUnboundedWeights"
EMPTY = "DegenerateEmpty"
NON_ERGODIC = "NonErgodic"

SERIES_START = 1 << 12
SERIES_CAP = 1 << 25
PROFILE_CAP = 1 << 22


class SolverError(RuntimeError):
    """A series or iteration failed to converge within its horizon."""


class RegimeError(ValueError):
    """A solver was called outside the regime it applies to."""


class NoFiniteSolution(Exception):
    def __init__(self, bound: float, ratio: float):
        super().__init__(f"alpha/lambda = {ratio:.12g} exceeds the ergodicity bound {bound:.12g}")
        self.bound = bound
        self.ratio = ratio


@dataclass
class StationarySolution:
    r: np.ndarray
    K: float
    x: float
    delta: float
    pi_bar: float
    r1_total: float
    mean_total: float
    regime: str
    residuals: dict = field(default_factory=dict)
    heuristic: bool = False
    notes: list = field(default_factory=list)

    @property
    def mean_score(self) -> float:
        return self.mean_total / self.r1_total if self.r1_total > 0 else math.nan

    def to_json(self, prefix: int = 50) -> dict:
        return {
            "regime": self.regime,
            "K": _num(self.K),
            "x": _num(self.x),
            "delta": _num(self.delta),
            "pi_bar": _num(self.pi_bar),
            "r_total": _num(self.r1_total),
            "r_mean_score": _num(self.mean_total),
            "r_prefix": [float(v) for v in self.r[:prefix]],
            "residuals": {k: _num(v) for k, v in self.residuals.items()},
            "heuristic": self.heuristic,
            "notes": list(self.notes),
        }


def _num(v):
    v = float(v)
    if math.isnan(v):
        return None
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


@dataclass
class PhaseDiagnosis:
    M: float
    always_ergodic: bool
    threshold_ratio: float
    classification_source: str
    never_ergodic: bool = False

    def classify(self, ratio: float) -> str:
        if self.never_ergodic:
            return UNBOUNDED
        if self.always_ergodic or ratio <= self.M:
            return ERGODIC
        return CONDENSED


# ---------------------------------------------------------------- recursions


def _weights_by_score(pol: WeightPolicy, L: int) -> np.ndarray:
    a = np.zeros(L + 1)
    a[1:] = pol.weights(L)
    return a


def _scaled_profile(x: float, pol: WeightPolicy, theta: ProbSeq, phi: ProbSeq, L: int) -> np.ndarray:
    """``s_1..s_L`` for the unit-rate recursion at a given ``x``."""
    return _kernels.weighted_recursion(float(x), _weights_by_score(pol, L), theta.tails,
                                       phi.tails, L)


def recursion_given_K(K: float, p: ModelParams, pol: WeightPolicy, theta: ProbSeq,
                      phi: ProbSeq, L: int) -> np.ndarray:
    """Stationary profile ``r_1..r_L`` for a prescribed weighted mass ``K``."""
    if not K > 0:
        raise ValueError("K must be positive")
    _require_weights(pol)
    x = p.alpha / (p.mu * K)
    return (p.lam / p.mu) * _scaled_profile(x, pol, theta, phi, L)


def closed_form_theta_z(K: float, p: ModelParams, pol: WeightPolicy, phi: ProbSeq,
                        L: int) -> np.ndarray:
    """Explicit solution of the first-order recursion (unit score increments).

    ``r_{n+1} = (lam/mu) A_n sum_{j<=n} (Phi_j / A_j) x**(n-j)``.
    """
    if not K > 0:
        raise ValueError("K must be positive")
    _require_weights(pol)
    x = p.alpha / (p.mu * K)
    return (p.lam / p.mu) * _closed_form_scaled(x, pol, phi, L)


def _closed_form_scaled(x: float, pol: WeightPolicy, phi: ProbSeq, L: int) -> np.ndarray:
    la = pol.log_cum_weights(L)  # log A_0..log A_L
    n = np.arange(L)
    out = np.zeros(L)
    if x == 0.0:
        m = min(L, len(phi.tails))
        out[:m] = phi.tails[:m]
        return out
    lx = math.log(x)
    for j, big_phi in enumerate(phi.tails):
        if j >= L or big_phi == 0.0:
            continue
        k = n[j:]
        out[j:] += big_phi * np.exp(la[k] - la[j] + (k - j) * lx)
    return out


def _require_weights(pol):
    if not isinstance(pol, WeightPolicy) or isinstance(pol, AsymptoticClass):
        raise PolicyError("this solver needs a policy with concrete pointwise weights")


# ------------------------------------------------------------- the F series


CACHE_T = 1 << 21
CHUNK = 1 << 20


@lru_cache(maxsize=16)
def _u_coeffs(pol: WeightPolicy, phi: ProbSeq, T: int) -> np.ndarray:
    """``u_1..u_T`` (index 0 holds ``u_1``)."""
    u = _u_block(pol, phi, pol.log_cum_weights(len(phi.tails) + T), 1, T + 1)
    u.flags.writeable = False
    return u


def _u_block(pol, phi, la, k0, k1):
    k = np.arange(k0, k1)
    u = np.zeros(k1 - k0)
    for j, big_phi in enumerate(phi.tails):
        if big_phi:
            u += big_phi * np.exp(la[j + k] - la[j])
    return u


def _u_single(pol: WeightPolicy, phi: ProbSeq, k: int) -> float:
    la = pol.log_cum_weights(len(phi.tails) + k)
    return float(sum(b * math.exp(la[j + k] - la[j]) for j, b in enumerate(phi.tails) if b))


def _dot_powers(u: np.ndarray, k0: int, x: float, deriv: bool) -> float:
    """``sum_i u[i] x**(k0+i)`` or its termwise derivative."""
    k = np.arange(k0, k0 + len(u), dtype=float)
    lx = math.log(x)
    if deriv:
        return float(np.dot(u * k, np.exp((k - 1.0) * lx)))
    return float(np.dot(u, np.exp(k * lx)))


def _partial(pol: WeightPolicy, phi: ProbSeq, x: float, T: int, deriv: bool = False) -> float:
    """``sum_{k<=T} u_k x**k`` (or the derivative), chunked for large ``T``."""
    if T <= CACHE_T:
        return _dot_powers(_u_coeffs(pol, phi, T), 1, x, deriv)
    la = pol.log_cum_weights(len(phi.tails) + T)
    total = 0.0
    for k0 in range(1, T + 1, CHUNK):
        k1 = min(k0 + CHUNK, T + 1)
        total += _dot_powers(_u_block(pol, phi, la, k0, k1), k0, x, deriv)
    return total


def _series_tail_bound(u_next: float, x: float, T: int, deriv: bool) -> float:
    """Bound on the dropped tail; ``u_k`` is non-increasing so ``u_k <= u_{T+1}``."""
    if deriv:
        # sum_{k>T} k x**(k-1) = x**T ((T+1) - T x) / (1-x)**2
        return u_next * x**T * ((T + 1) - T * x) / (1.0 - x) ** 2
    return u_next * x ** (T + 1) / (1.0 - x)


def _terms_needed(pol, phi, x: float, tol: float, deriv: bool) -> int:
    T = SERIES_START
    while _series_tail_bound(_u_single(pol, phi, T + 1), x, T, deriv) > tol:
        T *= 2
        if T > SERIES_CAP:
            raise SolverError(f"series at x={x!r} needs more than {SERIES_CAP} terms")
    return T


def F_series(x: float, pol: WeightPolicy, phi: ProbSeq, tol: float = 1e-13) -> float:
    """``F(x) = sum_{k>=1} u_k x**k`` with truncation error at most ``tol``.

    At ``x = 1`` the value is finite exactly when ``sum_n A_n`` converges;
    the tail is then closed with the policy's own tail estimate.
    """
    return _F(x, pol, phi, tol, deriv=False)


def F_prime(x: float, pol: WeightPolicy, phi: ProbSeq, tol: float = 1e-13) -> float:
    """Termwise derivative ``F'(x) = sum_k k u_k x**(k-1)``."""
    return _F(x, pol, phi, tol, deriv=True)


def _F(x, pol, phi, tol, deriv):
    if x < 0 or x > 1:
        raise ValueError(f"F is only defined on [0, 1]; got x={x}")
    _require_weights(pol)
    if x == 0:
        return float(_u_coeffs(pol, phi, 1)[0]) if deriv else 0.0
    if x == 1:
        return _F_at_one(pol, phi, deriv)
    T = _terms_needed(pol, phi, x, tol, deriv)
    return _partial(pol, phi, x, T, deriv)


def _F_at_one(pol: WeightPolicy, phi: ProbSeq, deriv: bool) -> float:
    power = 1 if deriv else 0
    if not pol.asymptotics().weighted_cum_summable(power):
        return math.inf
    T = 1 << 17
    u = _u_coeffs(pol, phi, T)
    k = np.arange(1, T + 1, dtype=float)
    head = math.fsum(u * k) if deriv else math.fsum(u)
    # sum_{k>T} k^p u_k = sum_j (Phi_j/A_j) sum_{m>j+T} (m-j)^p A_m
    la = pol.log_cum_weights(len(phi.tails))
    tail = 0.0
    for j, big_phi in enumerate(phi.tails):
        if not big_phi:
            continue
        t = pol.cum_tail(j + T, power)
        if deriv:
            t -= j * pol.cum_tail(j + T, 0)
        tail += big_phi * math.exp(-la[j]) * t
    return head + tail


def _F_compare(x: float, pol: WeightPolicy, phi: ProbSeq, target: float) -> float:
    """A value of ``F(x)`` accurate enough to compare with ``target``.

    Partial sums are lower bounds, so growth past ``target`` settles the
    comparison early; otherwise the certified tail decides.
    """
    if x >= 1.0:
        return _F_at_one(pol, phi, False)
    T = SERIES_START
    while True:
        part = _partial(pol, phi, x, T)
        if part >= target:
            return part
        bound = _series_tail_bound(_u_single(pol, phi, T + 1), x, T, False)
        if part + bound < target or bound <= 1e-15 * max(target, 1e-300):
            return part
        T *= 2
        if T > SERIES_CAP:
            raise SolverError(f"cannot resolve F({x!r}) against {target!r} within {SERIES_CAP} terms")


# ------------------------------------------------------------ classification


def ergodicity_bound(pol: Policy, phi: ProbSeq) -> PhaseDiagnosis:
    """Ergodicity bound ``M = F(1)`` for a weight policy with unit increments."""
    if isinstance(pol, CumulativeF):
        raise PolicyError("use cumulative_threshold for cumulative policies")
    asym = pol.asymptotics()
    if asym.kind == "unbounded":
        return PhaseDiagnosis(0.0, False, 0.0, "unbounded_weights", never_ergodic=True)
    if isinstance(pol, AsymptoticClass):
        if asym.cum_weights_summable:
            # finite support makes every moment of phi finite
            return PhaseDiagnosis(math.nan, False, math.nan, "weight_asymptotics")
        return PhaseDiagnosis(math.inf, True, math.inf, "weight_asymptotics")
    M = _F_at_one(pol, phi, False)
    return PhaseDiagnosis(M, math.isinf(M), M, "series_bound")


def cumulative_threshold(p: ModelParams, f: CumulativeF, theta: ProbSeq, phi: ProbSeq) -> bool:
    """Closed-form ergodicity test for cumulative policies."""
    lhs = p.alpha * moment1(theta) * (f.slope_at_one - 1.0)
    return lhs <= p.lam * moment1(phi)


# ------------------------------------------------------- consistency solvers


def _check_unit_step(theta: ProbSeq):
    if not theta.is_unit_step():
        raise RegimeError("this solver needs theta(z) = z; use matrix_consistency_general")


def solve_consistency(p: ModelParams, pol: WeightPolicy, theta: ProbSeq, phi: ProbSeq,
                      tol: float = 1e-15) -> tuple[float, float]:
    """Solve ``alpha/lam = F(alpha/(mu K))`` for ``(x, K)``.

    Raises :class:`NoFiniteSolution` above the ergodicity bound.
    """
    _check_unit_step(theta)
    _require_weights(pol)
    if not (p.lam > 0 and p.alpha > 0):
        raise RegimeError("consistency equation needs lam > 0 and alpha > 0")
    target = p.alpha / p.lam
    diag = ergodicity_bound(pol, phi)
    if diag.never_ergodic:
        raise NoFiniteSolution(0.0, target)
    if target > diag.M:
        raise NoFiniteSolution(diag.M, target)
    x = bisect_increasing(lambda v: _F_compare(v, pol, phi, target), target, 0.0, 1.0, xtol=tol)
    return x, p.alpha / (p.mu * x)


class MatrixSolution(NamedTuple):
    x: float
    K: float
    r: np.ndarray


def _G_terms(x, pol, theta, phi, L):
    s = _scaled_profile(x, pol, theta, phi, L)
    return s, x * pol.weights(L) * s


def _tail_estimate(terms: np.ndarray) -> float:
    """Extrapolate the tail of a positive, eventually monotone series."""
    N = len(terms)
    w = max(N // 8, 8)
    a, b = terms[-1 - w], terms[-1]
    if b <= 1e-30 * terms.sum():
        return 0.0
    if a <= 0 or b >= a:
        return math.inf
    rho = (b / a) ** (1.0 / w)
    geometric = b * rho / (1.0 - rho)
    # power-law fallback: b ~ c n^-q
    q = math.log(a / b) / math.log((N - 1) / (N - 1 - w))
    power = b * (N - 1) / (q - 1.0) if q > 1.0 else math.inf
    return max(geometric, power) if rho > 1 - 64.0 / N else geometric


def _G_value(x, pol, theta, phi, target=None, cap=PROFILE_CAP):
    """``G(x)`` with horizon doubling; returns (value, tail_estimate, horizon)."""
    L = SERIES_START
    while True:
        _, terms = _G_terms(x, pol, theta, phi, L)
        part = math.fsum(terms)
        if target is not None and part >= target:
            return part, 0.0, L
        tail = _tail_estimate(terms)
        if tail <= 1e-14 * max(part, 1e-300):
            return part + tail, tail, L
        if target is not None and part + 2.0 * tail < target:
            return part + tail, 0.0, L
        if L >= cap:
            return part + tail, tail, L
        L *= 2


def radius(theta: ProbSeq) -> float:
    """Radius of convergence in ``x`` of the scaled recursion series."""
    return 1.0 / moment1(theta)


def matrix_consistency_general(p: ModelParams, pol: WeightPolicy, theta: ProbSeq, phi: ProbSeq,
                               horizon: int | None = None, tol: float = 1e-15) -> MatrixSolution:
    """Consistency solve for a general increment distribution.

    ``G(x) = x * sum_i a_i s_i(x)`` is evaluated by running the recursion
    rather than forming the matrix products explicitly. ``G`` is increasing
    in ``x`` so the root is bracketed by bisection on ``(0, 1/theta'(1)]``.
    """
    _require_weights(pol)
    if not (p.lam > 0 and p.alpha > 0):
        raise RegimeError("consistency equation needs lam > 0 and alpha > 0")
    if pol.asymptotics().kind == "unbounded":
        raise NoFiniteSolution(0.0, p.alpha / p.lam)
    target = p.alpha / p.lam
    xc = radius(theta)

    def g(v):
        value, tail, L = _G_value(v, pol, theta, phi, target)
        if value < target and not tail <= 1e-12 * max(value, 1e-300):
            raise SolverError(f"G({v!r}) not resolved with horizon {L}: tail estimate {tail:.3g}")
        return value

    top, _, _ = _G_value(xc, pol, theta, phi, target)
    if top < target:
        raise NoFiniteSolution(top, target)
    x = bisect_increasing(g, target, 0.0, xc, xtol=tol)
    L = horizon or _profile_length(lambda n: _G_terms(x, pol, theta, phi, n)[0])
    s = _scaled_profile(x, pol, theta, phi, L)
    return MatrixSolution(x, p.alpha / (p.mu * x), (p.lam / p.mu) * s)


def general_bound(pol: WeightPolicy, theta: ProbSeq, phi: ProbSeq) -> float:
    """Estimate of ``sup_x G(x)``, the general-increment analogue of ``M``."""
    _require_weights(pol)
    if pol.asymptotics().kind == "unit":
        return math.inf
    value, _, _ = _G_value(radius(theta), pol, theta, phi)
    return value


def _profile_length(make, start: int = 1024) -> int:
    """Smallest power-of-two horizon where the profile has decayed to noise."""
    L = start
    while L < PROFILE_CAP:
        s = make(L)
        if s[-1] <= 1e-17 * s.max() and s[-1] <= s[-2]:
            return L
        L *= 2
    return PROFILE_CAP


# --------------------------------------------------------- condensed branch


def condensed_solution(p: ModelParams, pol: WeightPolicy, theta: ProbSeq, phi: ProbSeq,
                       L: int = 1 << 16) -> StationarySolution:
    """Condensed stationary regime for ``alpha/lam`` above the bound ``M``.

    Uses the continuity ansatz ``alpha/(mu K) = 1``, which gives
    ``delta = (alpha - lam M)/mu``, ``pi_bar = lam M / alpha`` and
    ``r(1) = (lam/mu)(M + phi'(1))``.
    """
    _check_unit_step(theta)
    _require_weights(pol)
    diag = ergodicity_bound(pol, phi)
    M = diag.M
    if not math.isfinite(M):
        raise RegimeError("no finite ergodicity bound: the system is always ergodic")
    if p.alpha <= 0 or (p.lam > 0 and p.alpha / p.lam < M):
        raise RegimeError("parameters are in the ergodic region")
    K = p.alpha / p.mu
    delta = (p.alpha - p.lam * M) / p.mu
    pi_bar = p.lam * M / p.alpha
    phi1 = moment1(phi)
    r = closed_form_theta_z(K, p, pol, phi, L) if p.lam > 0 else np.zeros(L)

    # Beyond the support of phi the profile is (lam/mu) C A_n.
    la = pol.log_cum_weights(len(phi.tails))
    C = math.fsum(b * math.exp(-la[j]) for j, b in enumerate(phi.tails))
    scale = p.lam / p.mu * C
    r_total = math.fsum(r) + scale * pol.cum_tail(L - 1, 0)
    mean_tail = scale * (pol.cum_tail(L - 1, 1) + pol.cum_tail(L - 1, 0))
    mean_total = math.fsum(np.arange(1, L + 1) * r) + mean_tail
    weighted = math.fsum(pol.weights(L) * r) + scale * pol.cum_tail(L, 0)

    residuals = {
        "transient1": abs(1.0 - (p.lam / p.alpha) * M - delta / K) if p.alpha > 0 else 0.0,
        "weighted_mass": abs(weighted + delta - K) / K,
    }
    sol = StationarySolution(
        r=r, K=K, x=1.0, delta=delta, pi_bar=pi_bar,
        r1_total=p.lam / p.mu * (M + phi1) if p.lam > 0 else 0.0,
        mean_total=mean_total if p.lam > 0 else 0.0,
        regime=CONDENSED if delta > 0 else ERGODIC,
        residuals=residuals, heuristic=bool(delta > 0),
    )
    sol.residuals["r_total_sum"] = abs(r_total - sol.r1_total)
    if delta > 0:
        sol.notes.append("condensed branch: x = 1 by the continuity ansatz")
    return sol


# ------------------------------------------------------- cumulative policies


@dataclass
class CumulativeResult:
    P_inf: float
    ergodic: bool
    threshold_ergodic: bool
    P: np.ndarray
    r: np.ndarray
    r1_total: float
    iterations: int


def cumulative_fixed_point(p: ModelParams, f: CumulativeF, theta: ProbSeq, phi: ProbSeq,
                           tol: float = 1e-10, horizon: int = 100_000) -> CumulativeResult:
    """Iterate the cumulative recursion for ``P_n`` and locate its limit.

    ``P_{n+1} = c1 sum_{i<n} f(P_{n-i}) Theta_i + c2 sum_{i<=n} Phi_i`` with
    ``c1 = alpha/(mu r(1))``, ``c2 = lam/(mu r(1))`` and ``r(1)`` from the
    no-escape mass identity. The non-decreasing iterates converge to the
    smallest root in ``[0, 1]`` of the limit equation
    ``P = c1 theta'(1) f(P) + c2 phi'(1)``; the iteration is run until it
    stagnates and the root is then pinned down by bisection from the last
    iterate.
    """
    if p.lam <= 0:
        raise RegimeError("cumulative recursion needs lam > 0")
    th1, ph1 = moment1(theta), moment1(phi)
    r1 = (p.alpha * th1 + p.lam * ph1) / p.mu
    c1 = p.alpha / (p.mu * r1)
    c2 = p.lam / (p.mu * r1)
    Th = theta.tails
    cum_phi = np.cumsum(tail_array(phi, max(len(phi.tails), 1)))

    P = np.zeros(horizon + 1)
    fP = np.zeros(horizon + 1)
    n_min = len(Th) + len(phi.tails) + 2
    n = 0
    for n in range(horizon):
        m = min(n, len(Th))
        acc = float(np.dot(fP[n - m + 1:n + 1][::-1], Th[:m])) if m else 0.0
        P[n + 1] = min(c1 * acc + c2 * cum_phi[min(n, len(cum_phi) - 1)], 1.0)
        fP[n + 1] = f.f(P[n + 1])
        if n >= n_min and P[n + 1] - P[n] <= 1e-16:
            break
    last = n + 1
    P = P[: last + 1]

    g = lambda v: c1 * th1 * f.f(v) + c2 * ph1 - v  # noqa: E731
    slope_one = c1 * th1 * f.slope_at_one - 1.0
    P_inf = 1.0
    if slope_one > 0:
        # g is convex with g(1) = 0 and g'(1) > 0: it dips below zero first
        lo = P[-1]
        turn = bisect_increasing(lambda v: c1 * th1 * f.df(v), 1.0, lo, 1.0, xtol=1e-15)
        if g(turn) < 0:
            # iterates approach the root from below; g(lo) < 0 only by rounding
            P_inf = bisect_increasing(lambda v: -g(v), 0.0, lo, turn, xtol=1e-15) if g(lo) >= 0 else lo
    ergodic = bool(P_inf >= 1.0 - tol)
    threshold = cumulative_threshold(p, f, theta, phi)
    if ergodic != threshold:
        raise SolverError(f"iteration (P_inf={P_inf!r}) disagrees with the closed-form threshold")
    if P[-1] > P_inf + 1e-9:
        raise SolverError("iterates overshoot the limit root")
    r = r1 * np.diff(P)
    return CumulativeResult(P_inf, ergodic, threshold, P, r, r1, last)


# ---------------------------------------------------------------- dispatcher


def alpha_zero_profile(p: ModelParams, phi: ProbSeq) -> np.ndarray:
    return p.lam / p.mu * phi.tails.copy()


def solve(p: ModelParams, pol: Policy, theta: ProbSeq, phi: ProbSeq) -> StationarySolution:
    """Compute the stationary regime, routing to the applicable solver."""
    if isinstance(pol, AsymptoticClass):
        raise PolicyError("AsymptoticClass policies support classification only")
    if p.lam == 0:
        sol = StationarySolution(np.zeros(phi.max_score), 0.0, math.nan, 0.0, 0.0, 0.0, 0.0, EMPTY)
        sol.notes.append("no creation: the empty state is absorbing")
        return sol
    if p.alpha == 0:
        sol = _alpha_zero(p, pol, phi)
    elif isinstance(pol, CumulativeF):
        sol = _cumulative(p, pol, theta, phi)
    elif pol.asymptotics().kind == "unbounded":
        sol = _unbounded(p, pol, phi)
    elif theta.is_unit_step():
        target = p.alpha / p.lam
        diag = ergodicity_bound(pol, phi)
        if target <= diag.M:
            sol = _ergodic_unit(p, pol, theta, phi)
        else:
            sol = condensed_solution(p, pol, theta, phi)
    else:
        sol = _general(p, pol, theta, phi)
    _verify(sol, p, theta, phi)
    return sol


def _alpha_zero(p, pol, phi):
    r = alpha_zero_profile(p, phi)
    phi1 = moment1(phi)
    mean = p.lam * (moment2_factorial(phi) + 2 * phi1) / (2 * p.mu)
    K = float(np.dot(pol.effective_weights(r)[0], r)) if isinstance(pol, CumulativeF) \
        else math.fsum(pol.weights(len(r)) * r)
    return StationarySolution(r, K, 0.0, 0.0, 1.0, p.lam * phi1 / p.mu, mean, ERGODIC,
                              notes=["alpha = 0: visits never happen, policy is irrelevant"])


def _unbounded(p, pol, phi):
    r = alpha_zero_profile(p, phi)
    phi1 = moment1(phi)
    mean = p.lam * (moment2_factorial(phi) + 2 * phi1) / (2 * p.mu)
    sol = StationarySolution(r, math.inf, 0.0, math.nan, 0.0, p.lam * phi1 / p.mu, mean, UNBOUNDED)
    sol.notes.append("unbounded weights: every visit goes to a POI of infinite score")
    return sol


def _cumulative(p, pol, theta, phi):
    res = cumulative_fixed_point(p, pol, theta, phi)
    r = res.r
    mean = math.fsum(np.arange(1, len(r) + 1) * r)
    K = res.r1_total / pol.slope_at_one
    sol = StationarySolution(
        r, K, p.alpha / (p.mu * K), 0.0 if res.ergodic else math.nan,
        1.0 if res.ergodic else math.nan, res.r1_total, mean if res.ergodic else math.nan,
        ERGODIC if res.ergodic else NON_ERGODIC,
    )
    sol.residuals["P_inf_gap"] = 1.0 - res.P_inf
    if not res.ergodic:
        sol.notes.append(f"cumulative recursion limit P_inf = {res.P_inf!r} < 1")
        sol.heuristic = True
    return sol


def _ergodic_unit(p, pol, theta, phi):
    x, K = solve_consistency(p, pol, theta, phi)
    L = _profile_length(lambda n: _closed_form_scaled(x, pol, phi, n))
    r = closed_form_theta_z(K, p, pol, phi, L)
    return _finish_ergodic(r, x, K, p, pol)


def _general(p, pol, theta, phi):
    try:
        x, K, r = matrix_consistency_general(p, pol, theta, phi)
    except NoFiniteSolution as exc:
        return _general_condensed(p, pol, theta, phi, exc.bound)
    return _finish_ergodic(r, x, K, p, pol)


def _finish_ergodic(r, x, K, p, pol):
    n = np.arange(1, len(r) + 1)
    # geometric closure beyond the window
    rho = x
    tail = r[-1] * rho / (1 - rho) if rho < 1 else 0.0
    total = math.fsum(r) + tail
    mean = math.fsum(n * r) + (r[-1] * (len(r) * rho / (1 - rho) + rho / (1 - rho) ** 2) if rho < 1 else 0.0)
    weighted = math.fsum(pol.weights(len(r)) * r)
    sol = StationarySolution(r, K, x, 0.0, 1.0, total, mean, ERGODIC)
    sol.residuals["self_consistency"] = abs(K - weighted) / K
    return sol


def _general_condensed(p, pol, theta, phi, bound):
    xc = radius(theta)
    K = p.alpha / (p.mu * xc)
    delta = K * (1.0 - p.lam * bound / p.alpha)
    pi_bar = p.lam * bound / p.alpha
    L = 1 << 16
    r = (p.lam / p.mu) * _scaled_profile(xc, pol, theta, phi, L)
    r1 = (p.alpha * pi_bar * moment1(theta) + p.lam * moment1(phi)) / p.mu
    sol = StationarySolution(r, K, xc, delta, pi_bar, r1, math.nan, CONDENSED, heuristic=True)
    sol.notes.append("general increments: x set to the radius 1/theta'(1) by the continuity ansatz;"
                     " the bound is a tail-extrapolated estimate")
    return sol


def gf_residual(sol: StationarySolution, p: ModelParams, pol: Policy, theta: ProbSeq,
                phi: ProbSeq) -> float:
    """Max termwise residual of the stationary generating-function identity.

    Checks ``r_{n+1} = (alpha/mu) sum_{i<n} pi_{n-i} Theta_i + (lam/mu) Phi_n``
    with ``pi`` evaluated from the solution itself.
    """
    r = sol.r
    L = len(r)
    if isinstance(pol, CumulativeF):
        pi = pol.probs(r)
    else:
        if math.isinf(sol.K):
            return 0.0
        pi = pol.weights(L) * r / sol.K
    Th = tail_array(theta, L)
    Ph = tail_array(phi, L)
    conv = np.convolve(pi, Th)[: L - 1]  # conv[n-1] = sum_{i<n} pi_{n-i} Theta_i
    pred = p.lam / p.mu * Ph.copy()
    pred[1:] += p.alpha / p.mu * conv
    return float(np.max(np.abs(pred - r)))


def _verify(sol, p, theta, phi):
    if sol.regime == EMPTY:
        return
    r1_err = abs(sol.r[0] - p.lam / p.mu)
    sol.residuals["first_level"] = r1_err
    if r1_err > 1e-10 * max(1.0, p.lam / p.mu):
        raise SolverError(f"r_1 = {sol.r[0]!r} differs from lam/mu = {p.lam / p.mu!r}")
    if math.isnan(sol.pi_bar):
        return
    rhs = p.alpha * sol.pi_bar * moment1(theta) + p.lam * moment1(phi)
    err = abs(p.mu * sol.r1_total - rhs)
    sol.residuals["mass_identity"] = err
    if not sol.heuristic and err > 1e-8 * max(1.0, rhs):
        raise SolverError(f"mass identity violated by {err:.3g}")
