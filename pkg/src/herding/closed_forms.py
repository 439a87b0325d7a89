"""Explicit special cases, used as analytic oracles and for the figure data."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from herding.distributions import ProbSeq, gf_eval, moment1, moment2_factorial
from herding.meanfield import ModelParams
from herding.numerics import hurwitz_tail
from herding.policies import RatioPower
from herding.stationary import F_prime, F_series, ergodicity_bound
from herding.distributions import degenerate


def uniform_policy_gf(p: ModelParams, theta: ProbSeq, phi: ProbSeq, z: float) -> float:
    """Generating function ``r(z)`` of the stationary profile under uniform selection."""
    if p.lam <= 0:
        raise ValueError("needs lam > 0")
    if not 0.0 <= z < 1.0:
        raise ValueError("z must lie in [0, 1); use the total mass formula at z = 1")
    if z == 0.0:
        return 0.0
    r1 = (p.alpha * moment1(theta) + p.lam * moment1(phi)) / p.mu
    den = p.alpha * (1.0 - gf_eval(theta, z)) + p.mu * r1 * (1.0 - 1.0 / z)
    if den == 0.0:
        raise ZeroDivisionError(f"denominator vanishes at z={z}")
    return p.lam * r1 * (gf_eval(phi, z) - 1.0) / den


def uniform_policy_total(p: ModelParams, theta: ProbSeq, phi: ProbSeq) -> float:
    return (p.alpha * moment1(theta) + p.lam * moment1(phi)) / p.mu


def alpha_zero_solution(p: ModelParams, phi: ProbSeq) -> tuple[np.ndarray, float, float]:
    """Profile, total mass and total score when nothing is ever visited."""
    if p.alpha != 0:
        raise ValueError("alpha_zero_solution needs alpha = 0")
    r = p.lam / p.mu * phi.tails.copy()
    r1 = p.lam * moment1(phi) / p.mu
    rp1 = p.lam * (moment2_factorial(phi) + 2.0 * moment1(phi)) / (2.0 * p.mu)
    return r, r1, rp1


def lerch(x: float, gamma: float, v: float = 1.0, tol: float = 1e-14) -> float:
    """``sum_{k>=0} x**k / (k + v)**gamma`` for ``0 <= x <= 1``.

    At ``x = 1`` (needs ``gamma > 1``) the tail past the summed block is the
    Hurwitz zeta remainder.
    """
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if gamma <= 0 or v <= 0:
        raise ValueError("gamma and v must be positive")
    if x == 0.0:
        return v ** (-gamma)
    if x == 1.0:
        if gamma <= 1.0:
            raise ValueError("the series diverges at x = 1 for gamma <= 1")
        n = 64
        k = np.arange(n, dtype=float)
        return math.fsum((k + v) ** (-gamma)) + hurwitz_tail(gamma, n + v)
    # x**k / (k+v)**g <= x**k v**-g, so the tail after T terms is below x**T v**-g / (1-x)
    T = 16
    while x**T * v ** (-gamma) / (1.0 - x) > tol:
        T *= 2
    k = np.arange(T, dtype=float)
    return math.fsum(np.exp(k * math.log(x)) / (k + v) ** gamma)


@dataclass(frozen=True)
class FigureRow:
    gamma: float
    x: float
    alpha: float
    r_prime_1: float
    regime: str


REGIME_ALWAYS = "always_ergodic"
REGIME_DIVERGENT = "bounded_alpha_divergent_score"
REGIME_BOUNDED = "bounded_alpha_bounded_score"


def trichotomy(gamma: float) -> str:
    if gamma <= 1.0:
        return REGIME_ALWAYS
    if gamma <= 2.0:
        return REGIME_DIVERGENT
    return REGIME_BOUNDED


def default_x_grid() -> np.ndarray:
    base = np.round(np.arange(1, 100) / 100.0, 2)
    # stops short of the point where the certified series would need more than 2**25 terms
    refine = 1.0 - np.geomspace(1e-3, 2e-6, 13)
    return np.unique(np.concatenate([base, refine]))


def figure_sweep(gammas, lam: float = 3.0, mu: float = 3.0, x_grid=None) -> list[FigureRow]:
    """Parametric curves ``(alpha, r'(1))`` for the ratio-power family with ``phi(z) = z``.

    Each ``x`` in the grid gives ``alpha = lam F(x)`` and the score column
    ``(lam/mu) x F'(x)``. Rows are ordered by ``gamma`` then ``alpha``.
    """
    xs = default_x_grid() if x_grid is None else np.asarray(x_grid, dtype=float)
    if np.any((xs <= 0) | (xs >= 1)):
        raise ValueError("x grid must lie strictly inside (0, 1)")
    phi = degenerate(1)
    rows = []
    for g in gammas:
        pol = RatioPower(float(g))
        curve = [
            FigureRow(float(g), float(x), float(lam * F_series(x, pol, phi)),
                      float(lam / mu * x * F_prime(x, pol, phi)),
                      trichotomy(float(g)))
            for x in xs
        ]
        rows.extend(sorted(curve, key=lambda row: row.alpha))
    return rows


def figure_endpoints(gamma: float, lam: float = 3.0, mu: float = 3.0) -> tuple[float, float]:
    """Limits of ``alpha`` and of the score column as ``x -> 1``."""
    pol = RatioPower(gamma)
    phi = degenerate(1)
    M = ergodicity_bound(pol, phi).M
    return lam * M, lam / mu * F_prime(1.0, pol, phi)


def write_figure_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["gamma", "x", "alpha", "r_prime_1"])
        for row in rows:
            w.writerow([repr(row.gamma), repr(row.x), repr(row.alpha), repr(row.r_prime_1)])
