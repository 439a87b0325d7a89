"""Deterministic mean-field dynamics of the score profile.

The profile ``r_i(t)`` (POIs per player with score ``i``) evolves as

    dr_i/dt = lam*phi_i + mu*(r_{i+1} - r_i)
              + alpha*(sum_{j} theta_j pi_{i-j}(r) - pi_i(r))

on a window of scores ``1..L``. Visits that would push a POI past ``L`` move
its mass into a separate ``escaped`` accumulator. With ``absorbing=True``
(the default) escaped POIs keep competing for visits with unit weight, as in
the condensed phase where the selection distribution becomes defective.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from herding.distributions import ProbSeq, moment1
from herding.policies import CumulativeF, Policy

log = logging.getLogger(__name__)

DEFAULT_L = 2000


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ModelParams:
    lam: float
    alpha: float
    mu: float

    def __post_init__(self):
        for name in ("lam", "alpha", "mu"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite")
        if self.mu <= 0:
            raise ValueError("mu must be strictly positive")
        if self.lam < 0 or self.alpha < 0:
            raise ValueError("lambda and alpha must be non-negative")


@dataclass
class MeanFieldState:
    r: np.ndarray
    t: float = 0.0
    escaped: float = 0.0

    @classmethod
    def empty(cls, L: int = DEFAULT_L) -> "MeanFieldState":
        return cls(np.zeros(L))

    @property
    def L(self) -> int:
        return len(self.r)


@dataclass
class Trajectory:
    t: np.ndarray
    r: np.ndarray  # shape (samples, L)
    escaped: np.ndarray
    clip_events: int = 0
    meta: dict = field(default_factory=dict)

    def state(self, k: int) -> MeanFieldState:
        return MeanFieldState(self.r[k].copy(), float(self.t[k]), float(self.escaped[k]))

    @property
    def final(self) -> MeanFieldState:
        return self.state(-1)

    def masses(self) -> np.ndarray:
        return self.r.sum(axis=1)

    def mean_scores(self) -> np.ndarray:
        m = self.masses()
        s = self.r @ np.arange(1, self.r.shape[1] + 1)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(m > 0, s / np.where(m > 0, m, 1.0), np.nan)


class _System:
    """Precomputed pieces of the right-hand side for one configuration."""

    def __init__(self, L, p: ModelParams, pol: Policy, theta: ProbSeq, phi: ProbSeq, absorbing=True):
        if L < phi.max_score:
            raise ValueError(f"window L={L} is below the largest initial score {phi.max_score}")
        self.L = L
        self.p = p
        self.pol = pol
        self.absorbing = absorbing and not isinstance(pol, CumulativeF)
        self.creation = np.zeros(L)
        self.creation[np.array(phi.scores) - 1] = p.lam * np.array(phi.masses)
        self.jumps = [(s, m) for s, m in zip(theta.scores, theta.masses)]
        # fraction of a visit to score j that leaves the window: sum_{s > L-j} theta_s
        j = np.arange(1, L + 1)
        self.leave = np.zeros(L)
        for s, m in self.jumps:
            self.leave[j + s > L] += m

    def probs(self, r, escaped):
        return self.pol.probs(r, max(escaped, 0.0) if self.absorbing else 0.0)

    def __call__(self, r, escaped):
        """Returns (dr/dt, escape rate)."""
        p = self.p
        rp = np.maximum(r, 0.0)
        d = self.creation.copy()
        d -= p.mu * rp
        d[:-1] += p.mu * rp[1:]
        if p.alpha > 0:
            pi = self.probs(rp, escaped)
            d -= p.alpha * pi
            for s, m in self.jumps:
                if s < self.L:
                    d[s:] += p.alpha * m * pi[: self.L - s]
            esc = p.alpha * float(pi @ self.leave)
        else:
            esc = 0.0
        return d, esc


def rhs(s: MeanFieldState, p: ModelParams, pol: Policy, theta: ProbSeq, phi: ProbSeq,
        absorbing: bool = True) -> tuple[np.ndarray, float]:
    """Time derivative of the profile and the rate of mass escaping the window."""
    return _System(s.L, p, pol, theta, phi, absorbing)(np.asarray(s.r, dtype=float), s.escaped)


def integrate(
    s0: MeanFieldState,
    p: ModelParams,
    pol: Policy,
    theta: ProbSeq,
    phi: ProbSeq,
    t_end: float,
    dt_sample: float = 1.0,
    rtol: float = 1e-7,
    atol: float = 1e-9,
    method: str = "RK45",
    absorbing: bool = True,
    max_step: float = math.inf,
) -> Trajectory:
    """Integrate from ``s0`` to ``t_end`` and sample on a regular grid.

    Samples are clipped at zero; the number of clipped entries is recorded.
    """
    if not t_end > s0.t:
        raise ValueError("t_end must exceed the initial time")
    system = _System(s0.L, p, pol, theta, phi, absorbing)
    L = s0.L

    def f(_t, y):
        d, esc = system(y[:L], y[L])
        out = np.empty(L + 1)
        out[:L] = d
        out[L] = esc
        return out

    n = max(1, int(math.ceil((t_end - s0.t) / dt_sample - 1e-9)))
    grid = np.linspace(s0.t, t_end, n + 1)
    y0 = np.append(np.asarray(s0.r, dtype=float), s0.escaped)
    sol = solve_ivp(f, (s0.t, t_end), y0, method=method, t_eval=grid, rtol=rtol, atol=atol,
                    max_step=max_step)
    if sol.status != 0:
        raise IntegrationError(sol.message)
    y = sol.y.T
    bad = ~np.isfinite(y)
    if bad.any():
        k, idx = np.argwhere(bad)[0]
        raise IntegrationError(f"non-finite value at sample {k}, index {idx + 1}")
    r = y[:, :L]
    neg = r < 0
    clips = int(neg.sum())
    if clips:
        log.debug("clipped %d negative entries (min %.3g)", clips, r.min())
        r = np.where(neg, 0.0, r)
    escaped = np.maximum.accumulate(np.maximum(y[:, L], 0.0))
    return Trajectory(sol.t, r, escaped, clips, {"nfev": sol.nfev, "L": L, "absorbing": absorbing})


def check_truncation(traj: Trajectory, tol: float = 1e-10) -> float:
    """Largest top-bin value along the trajectory; raises if it exceeds ``tol``.

    Meant for ergodic runs, where the window must hold essentially all mass.
    """
    top = float(traj.r[:, -1].max())
    if top > tol:
        raise IntegrationError(f"top bin reached {top:.3g} > {tol:g}; enlarge the window L")
    return top


def mass(s: MeanFieldState) -> float:
    return float(np.sum(s.r))


def mean_score(s: MeanFieldState) -> float:
    m = mass(s)
    if m <= 0:
        raise ValueError("mean score is undefined for an empty profile")
    return float(np.arange(1, s.L + 1) @ s.r) / m


def cesaro(traj: Trajectory, observable) -> float:
    """Time average of ``observable`` over the trajectory (trapezoid rule).

    ``observable`` is an array of per-sample values or a callable taking the
    trajectory and returning one.
    """
    if len(traj.t) == 0:
        raise ValueError("empty trajectory")
    values = observable(traj) if callable(observable) else np.asarray(observable, dtype=float)
    if len(traj.t) == 1:
        return float(values[0])
    span = traj.t[-1] - traj.t[0]
    return float(np.trapezoid(values, traj.t) / span)


def mass_balance_residual(traj: Trajectory, p: ModelParams, pol: Policy, theta: ProbSeq,
                          phi: ProbSeq) -> float:
    """Max over samples of |d(mass + escaped)/dt - (lam - mu r_1)| from the RHS."""
    system = _System(traj.r.shape[1], p, pol, theta, phi, traj.meta.get("absorbing", True))
    worst = 0.0
    for k in range(len(traj.t)):
        d, esc = system(traj.r[k], traj.escaped[k])
        lhs = math.fsum(d) + esc
        worst = max(worst, abs(lhs - (p.lam - p.mu * traj.r[k, 0])))
    return worst


def mass_bound(p: ModelParams, theta: ProbSeq, phi: ProbSeq) -> float:
    """Upper bound on the long-run average mass."""
    return (p.alpha * moment1(theta) + p.lam * moment1(phi)) / p.mu


def write_csv(traj: Trajectory, path, prefix: int = 20) -> None:
    prefix = min(prefix, traj.r.shape[1])
    masses = traj.masses()
    means = traj.mean_scores()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", *[f"r{i}" for i in range(1, prefix + 1)], "mass", "mean_score", "escaped_mass"])
        for k in range(len(traj.t)):
            w.writerow([repr(float(traj.t[k])), *(repr(float(v)) for v in traj.r[k, :prefix]),
                        repr(float(masses[k])), repr(float(means[k])), repr(float(traj.escaped[k]))])
