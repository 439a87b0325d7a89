"""Exact event-driven simulation of the finite-N game.

Three aggregate channels drive the chain: creation (rate ``lam N``), decay
(rate ``mu`` per POI) and visits (rate ``alpha N``). A visit arriving while
no POI exists is a null event. Within a channel the score is sampled from
Fenwick trees over score counts (decay, cumulative policies) or over
``a_j n_j`` (weight policies), so each event costs ``O(log cap)``.

All randomness comes from a ``numpy.random.Generator`` seeded once per run;
four uniforms are drawn per event, which keeps runs byte-reproducible.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from herding import _kernels
from herding.distributions import ProbSeq
from herding.meanfield import ModelParams, Trajectory
from herding.policies import CumulativeF, Policy, WeightPolicy, to_config

DEFAULT_CAP = 10**6
_BUFFER = 4 * (1 << 15)
_REBUILD_EVERY = 1 << 20

# stats layout
CREATE, DECAY, DEATH, VISIT, NULL_VISIT, OVERFLOW = range(6)
N_POI, TOTAL_SCORE, CREATION_SCORE, VISIT_SCORE, ESCAPED_SCORE, EVENTS = range(6, 12)
STAT_NAMES = ("creations", "decays", "deaths", "visits", "null_visits", "overflows", "pois",
              "total_score", "creation_score", "visit_score", "escaped_score", "events")

EVENT_NAMES = {0: "create", 1: "decay", 2: "visit", 3: "null_visit", -1: "none"}

# kernel exit codes
_REACHED, _NEED_UNIFORMS, _MAX_EVENTS, _ABSORBED = range(4)


@njit(cache=True)
def _pick(cdf, values, u):
    for k in range(cdf.shape[0]):
        if u < cdf[k]:
            return values[k]
    return values[-1]


@njit(cache=True)
def _run(counts, ctree, wtree, weights, top_bit, cap, lam_n, mu, alpha_n,
         phi_cdf, phi_val, th_cdf, th_val, cumulative, c_exp,
         t, t_stop, max_events, unif, pos, stats):
    last = -1
    done = 0
    while True:
        if done >= max_events:
            return t, pos, _MAX_EVENTS, last
        n_poi = stats[6]
        if n_poi == 0 and lam_n == 0.0:
            return math.inf, pos, _ABSORBED, last
        if pos + 4 > unif.shape[0]:
            return t, pos, _NEED_UNIFORMS, last
        rate = lam_n + mu * n_poi + alpha_n
        dt = -math.log(1.0 - unif[pos]) / rate
        if t + dt > t_stop:
            pos += 1
            return t_stop, pos, _REACHED, last
        t += dt
        ch = unif[pos + 1] * rate
        u_sel = unif[pos + 2]
        u_jump = unif[pos + 3]
        pos += 4
        done += 1
        stats[11] += 1
        if ch < lam_n:
            k = _pick(phi_cdf, phi_val, u_sel)
            counts[k] += 1
            _kernels.fenwick_add(ctree, k, 1.0)
            _kernels.fenwick_add(wtree, k, weights[k])
            stats[0] += 1
            stats[6] += 1
            stats[7] += k
            stats[8] += k
            last = 0
        elif ch < lam_n + mu * n_poi:
            j = _kernels.fenwick_search(ctree, math.floor(u_sel * n_poi), top_bit)
            counts[j] -= 1
            _kernels.fenwick_add(ctree, j, -1.0)
            _kernels.fenwick_add(wtree, j, -weights[j])
            if j > 1:
                counts[j - 1] += 1
                _kernels.fenwick_add(ctree, j - 1, 1.0)
                _kernels.fenwick_add(wtree, j - 1, weights[j - 1])
            else:
                stats[2] += 1
                stats[6] -= 1
            stats[1] += 1
            stats[7] -= 1
            last = 1
        else:
            if n_poi == 0:
                stats[4] += 1
                last = 3
                continue
            if cumulative:
                # smallest j with P_j >= u**(1/c): selects j w.p. f(P_j) - f(P_{j-1})
                cut = math.ceil(u_sel ** (1.0 / c_exp) * n_poi) - 1.0
                j = _kernels.fenwick_search(ctree, max(cut, 0.0), top_bit)
            else:
                total_w = _kernels.fenwick_prefix(wtree, cap)
                j = _kernels.fenwick_search(wtree, u_sel * total_w, top_bit)
                if j > cap or counts[j] == 0:
                    # float residue in an empty slot; fall back to the count tree
                    j = _kernels.fenwick_search(ctree, math.floor(u_sel * n_poi), top_bit)
            i = _pick(th_cdf, th_val, u_jump)
            counts[j] -= 1
            _kernels.fenwick_add(ctree, j, -1.0)
            _kernels.fenwick_add(wtree, j, -weights[j])
            stats[3] += 1
            stats[9] += i
            stats[7] += i
            if j + i > cap:
                stats[5] += 1
                stats[6] -= 1
                stats[10] += j + i
                stats[7] -= j + i
            else:
                counts[j + i] += 1
                _kernels.fenwick_add(ctree, j + i, 1.0)
                _kernels.fenwick_add(wtree, j + i, weights[j + i])
            last = 2


def _cdf(d: ProbSeq):
    cdf = np.cumsum(np.array(d.masses))
    cdf[-1] = 1.0
    return cdf, np.array(d.scores, dtype=np.int64)


class SimState:
    """Finite-N configuration plus the sampling structures that go with it."""

    def __init__(self, N: int, p: ModelParams, pol: Policy, theta: ProbSeq, phi: ProbSeq,
                 seed: int = 0, score_cap: int = DEFAULT_CAP, counts: dict | None = None):
        if N < 1:
            raise ValueError("need at least one player")
        if score_cap < phi.max_score:
            raise ValueError("score cap is below the largest initial score")
        if isinstance(pol, CumulativeF):
            if pol.exponent is None:
                raise NotImplementedError("the simulator samples only power cumulative policies")
            self.cumulative, self.c_exp = True, float(pol.exponent)
            weights = np.ones(score_cap + 1)
        elif isinstance(pol, WeightPolicy):
            self.cumulative, self.c_exp = False, 1.0
            weights = np.zeros(score_cap + 1)
            weights[1:] = pol.weights(score_cap)
        else:
            raise TypeError(f"unsupported policy {pol!r}")
        self.N, self.p, self.pol, self.theta, self.phi = N, p, pol, theta, phi
        self.seed = seed
        self.cap = score_cap
        self.weights = weights
        self.top_bit = 1 << (score_cap.bit_length() - 1)
        self.counts = np.zeros(score_cap + 1, dtype=np.int64)
        self.stats = np.zeros(len(STAT_NAMES), dtype=np.int64)
        for score, n in (counts or {}).items():
            score, n = int(score), int(n)
            if not 1 <= score <= score_cap or n < 0:
                raise ValueError(f"bad initial count {n} at score {score}")
            self.counts[score] = n
        self.stats[N_POI] = self.counts.sum()
        self.stats[TOTAL_SCORE] = int(np.arange(score_cap + 1) @ self.counts)
        self._rebuild()
        self.t = 0.0
        self.rng = np.random.default_rng(seed)
        self._unif = self.rng.random(_BUFFER)
        self._pos = 0
        self._since_rebuild = 0
        self._phi_cdf, self._phi_val = _cdf(phi)
        self._th_cdf, self._th_val = _cdf(theta)

    def _rebuild(self):
        c = self.counts.astype(float)
        self.ctree = _kernels.fenwick_build(c)
        self.wtree = _kernels.fenwick_build(c * self.weights)

    def _advance(self, t_stop: float, max_events: int) -> int:
        p, N = self.p, self.N
        t, pos, code, last = _run(
            self.counts, self.ctree, self.wtree, self.weights, self.top_bit, self.cap,
            p.lam * N, p.mu, p.alpha * N, self._phi_cdf, self._phi_val, self._th_cdf,
            self._th_val, self.cumulative, self.c_exp, self.t, t_stop, max_events,
            self._unif, self._pos, self.stats,
        )
        self.t, self._pos = t, pos
        if code == _NEED_UNIFORMS:
            rest = self._unif[self._pos:]
            self._unif = np.concatenate([rest, self.rng.random(_BUFFER)])
            self._pos = 0
        return code, last

    def run_until(self, t_stop: float) -> None:
        while self.t < t_stop:
            before = self.stats[EVENTS]
            code, _ = self._advance(t_stop, _REBUILD_EVERY)
            self._since_rebuild += int(self.stats[EVENTS] - before)
            if self._since_rebuild >= _REBUILD_EVERY:
                self._rebuild()
                self._since_rebuild = 0
            if code in (_REACHED, _ABSORBED):
                break

    def step(self) -> tuple[str, float]:
        """Perform exactly one event; returns its name and the new time.

        On an absorbing state (no POIs, no creation) returns ``("none", inf)``.
        """
        while True:
            code, last = self._advance(math.inf, 1)
            if code == _NEED_UNIFORMS:
                continue
            if code == _ABSORBED:
                return "none", math.inf
            return EVENT_NAMES[last], self.t

    @property
    def n_pois(self) -> int:
        return int(self.stats[N_POI])

    def stat(self, name: str) -> int:
        return int(self.stats[STAT_NAMES.index(name)])

    def top_score(self) -> int:
        n = self.n_pois
        if n == 0:
            return 0
        return int(_kernels.fenwick_search(self.ctree, n - 1.0, self.top_bit))

    def profile(self) -> np.ndarray:
        """Normalized counts ``n_i / N`` for ``i = 1..top score``."""
        top = self.top_score()
        return self.counts[1:top + 1] / self.N

    def score_sum(self) -> int:
        return int(np.arange(self.cap + 1) @ self.counts)


@dataclass
class EmpiricalTrajectory:
    t: np.ndarray
    profiles: list
    mass: np.ndarray
    mean_score: np.ndarray
    top_score: np.ndarray
    overflow: np.ndarray
    stats: dict
    meta: dict = field(default_factory=dict)

    def prefix(self, k: int) -> np.ndarray:
        out = np.zeros((len(self.t), k))
        for row, prof in enumerate(self.profiles):
            m = min(k, len(prof))
            out[row, :m] = prof[:m]
        return out

    def fraction_above(self, threshold: int) -> np.ndarray:
        out = np.zeros(len(self.t))
        for row, prof in enumerate(self.profiles):
            total = prof.sum()
            out[row] = prof[threshold:].sum() / total if total > 0 else 0.0
        return out


def simulate(N: int, p: ModelParams, pol: Policy, theta: ProbSeq, phi: ProbSeq, t_end: float,
             seed: int = 0, dt_sample: float = 1.0, score_cap: int = DEFAULT_CAP,
             counts: dict | None = None) -> EmpiricalTrajectory:
    """Run one realization and sample it on a regular grid from 0 to ``t_end``."""
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    state = SimState(N, p, pol, theta, phi, seed, score_cap, counts)
    n = max(1, int(math.ceil(t_end / dt_sample - 1e-9)))
    grid = np.linspace(0.0, t_end, n + 1)
    profiles, masses, means, tops, over = [], [], [], [], []
    for tk in grid:
        state.run_until(tk)
        prof = state.profile()
        profiles.append(prof)
        m = state.n_pois / N
        masses.append(m)
        means.append(state.stats[TOTAL_SCORE] / state.n_pois if state.n_pois else math.nan)
        tops.append(state.top_score())
        over.append(state.stat("overflows"))
    stats = {name: int(v) for name, v in zip(STAT_NAMES, state.stats)}
    meta = {"N": N, "seed": seed, "t_end": t_end, "dt_sample": dt_sample, "score_cap": score_cap,
            "params": {"lambda": p.lam, "alpha": p.alpha, "mu": p.mu},
            "theta": {str(k): v for k, v in theta.as_dict().items()},
            "phi": {str(k): v for k, v in phi.as_dict().items()}}
    try:
        meta["policy"] = to_config(pol)
    except ValueError:
        meta["policy"] = repr(pol)
    return EmpiricalTrajectory(grid, profiles, np.array(masses), np.array(means), np.array(tops),
                               np.array(over), stats, meta)


@dataclass
class ComparisonReport:
    t: np.ndarray
    sup_error: np.ndarray
    mass_error: np.ndarray
    relative_mass_error: np.ndarray
    empirical_tail: np.ndarray
    meanfield_tail: np.ndarray
    threshold: int
    herding: bool

    @property
    def max_sup_error(self) -> float:
        return float(self.sup_error.max())

    @property
    def max_mass_error(self) -> float:
        return float(self.mass_error.max())

    @property
    def final_relative_mass_error(self) -> float:
        return float(self.relative_mass_error[-1])

    def summary(self) -> dict:
        return {"max_sup_error": self.max_sup_error, "max_mass_error": self.max_mass_error,
                "final_relative_mass_error": self.final_relative_mass_error,
                "threshold": self.threshold, "herding": self.herding}


def compare_to_meanfield(emp: EmpiricalTrajectory, mf: Trajectory, prefix: int = 20,
                         threshold: int | None = None) -> ComparisonReport:
    """Per-time distance between a simulated run and the mean-field trajectory.

    The herding indicator compares the fraction of POIs with score above
    ``threshold`` (default: the mean-field window length) with the mean-field
    tail including escaped mass, and also requires the top score to keep
    growing over the second half of the run.
    """
    if len(emp.t) != len(mf.t) or not np.allclose(emp.t, mf.t, rtol=0, atol=1e-9):
        raise ValueError("sample grids differ")
    k = min(prefix, mf.r.shape[1])
    sup = np.max(np.abs(emp.prefix(k) - mf.r[:, :k]), axis=1)
    mf_mass = mf.masses() + mf.escaped
    mass_err = np.abs(emp.mass - mf_mass)
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.where(mf_mass > 0, mass_err / np.where(mf_mass > 0, mf_mass, 1.0), mass_err)
    L = mf.r.shape[1]
    thr = L if threshold is None else int(threshold)
    emp_tail = emp.fraction_above(thr)
    with np.errstate(invalid="ignore", divide="ignore"):
        mf_tail = np.where(mf_mass > 0, (mf.r[:, thr:].sum(axis=1) + mf.escaped) / mf_mass, 0.0)
    half = len(emp.t) // 2
    growing = len(emp.t) > 2 and emp.top_score[-1] > emp.top_score[half] > 0
    herding = bool(growing and emp_tail[-1] > 0)
    return ComparisonReport(emp.t, sup, mass_err, rel, emp_tail, mf_tail, thr, herding)


def write_csv(emp: EmpiricalTrajectory, path, prefix: int = 20) -> None:
    rows = emp.prefix(prefix)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "mass", "mean_score", "top_score", "overflow_count",
                    *[f"r{i}" for i in range(1, prefix + 1)]])
        for k in range(len(emp.t)):
            w.writerow([repr(float(emp.t[k])), repr(float(emp.mass[k])), repr(float(emp.mean_score[k])),
                        int(emp.top_score[k]), int(emp.overflow[k]), *(repr(float(v)) for v in rows[k])])


def write_sidecar(emp: EmpiricalTrajectory, path) -> None:
    with open(path, "w") as fh:
        json.dump({**emp.meta, "stats": emp.stats}, fh, indent=2, sort_keys=True)
