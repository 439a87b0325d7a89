import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from herding.distributions import degenerate, make_prob_seq
from herding.meanfield import MeanFieldState, ModelParams, integrate
from herding.policies import CumulativeF, RatioPower, ScoreLinear, Uniform
from herding.simulator import (EmpiricalTrajectory, SimState, compare_to_meanfield, simulate, write_csv,
                               write_sidecar)

Z = degenerate(1)
UNIT = ModelParams(1.0, 1.0, 1.0)


def _selection_frequency(pol, counts, score, trials=3000):
    hits = 0
    for seed in range(trials):
        s = SimState(1, ModelParams(0.0, 1.0, 1e-300), pol, Z, Z, seed=seed, score_cap=64, counts=counts)
        event, _ = s.step()
        assert event == "visit"
        hits += s.counts[score] == counts[score] - 1
    return hits / trials


def _within(freq, prob, trials=3000, k=5.0):
    return abs(freq - prob) <= k * math.sqrt(prob * (1 - prob) / trials)


def test_absorbing_empty_state():
    s = SimState(10, ModelParams(0.0, 1.0, 1.0), Uniform(), Z, Z)
    assert s.step() == ("none", math.inf)
    s.run_until(50.0)
    assert s.stat("visits") == 0 and s.stat("decays") == 0 and s.stat("null_visits") == 0


def test_single_decay():
    s = SimState(1, ModelParams(0.0, 0.0, 1.0), Uniform(), Z, Z, score_cap=8, counts={1: 1})
    event, t = s.step()
    assert event == "decay" and 0 < t < math.inf
    assert s.n_pois == 0 and s.stat("deaths") == 1
    assert s.step() == ("none", math.inf)


def test_uniform_selection_is_proportional():
    assert _within(_selection_frequency(Uniform(), {3: 2, 7: 1}, 3), 2 / 3)


def test_weighted_selection():
    # a = (1/2, 2/3) for gamma = 1, so score 1 is picked w.p. (1/2) / (1/2 + 2/3) = 3/7
    assert _within(_selection_frequency(RatioPower(1.0), {1: 1, 2: 1}, 1), 3 / 7)


def test_cumulative_selection():
    # f(x) = x^2 on P = (1/2, 1): score 1 w.p. 1/4
    assert _within(_selection_frequency(CumulativeF.power(2.0), {1: 1, 2: 1}, 1), 1 / 4)


def test_creation_count_is_poisson():
    emp = simulate(100, ModelParams(3.0, 1.0, 1.0), Uniform(), Z, Z, 10.0, seed=7)
    assert abs(emp.stats["creations"] - 3000) <= 5 * math.sqrt(3000)


def test_mass_near_mean_field():
    emp = simulate(500, UNIT, Uniform(), Z, Z, 100.0, seed=3)
    assert emp.mass[-1] == pytest.approx(2.0, rel=0.1)


def test_reproducible():
    a = simulate(200, UNIT, RatioPower(2.0), Z, Z, 30.0, seed=42)
    b = simulate(200, UNIT, RatioPower(2.0), Z, Z, 30.0, seed=42)
    c = simulate(200, UNIT, RatioPower(2.0), Z, Z, 30.0, seed=43)
    assert np.array_equal(a.prefix(30), b.prefix(30)) and a.stats == b.stats
    assert a.stats != c.stats


def test_visit_rate_bookkeeping():
    N, T, alpha = 50, 40.0, 1.0
    total = 0
    for seed in range(20):
        emp = simulate(N, ModelParams(1.0, alpha, 1.0), Uniform(), Z, Z, T, seed=seed)
        total += emp.stats["visits"] + emp.stats["null_visits"]
    mean = 20 * alpha * N * T
    assert abs(total - mean) <= 5 * math.sqrt(mean)


@settings(max_examples=25)
@given(st.integers(0, 2**32), st.sampled_from([Uniform(), RatioPower(2.0), ScoreLinear(), CumulativeF.power(2.0)]),
       st.sampled_from([Z, make_prob_seq({5: 0.6, 15: 0.4})]), st.floats(0.0, 3.0), st.floats(0.0, 3.0))
def test_score_accounting(seed, pol, theta, lam, alpha):
    s = SimState(20, ModelParams(lam, alpha, 1.0), pol, theta, degenerate(3), seed=seed, score_cap=60,
                 counts={2: 3, 10: 1})
    for t in (1.0, 5.0, 15.0):
        s.run_until(t)
        assert np.all(s.counts >= 0)
        total = s.stat("total_score")
        assert total == s.score_sum()
        assert total == 16 + s.stat("creation_score") - s.stat("decays") + s.stat("visit_score") \
            - s.stat("escaped_score")
        assert s.n_pois == int(s.counts.sum())


def test_overflow_counter():
    s = SimState(10, ModelParams(1.0, 5.0, 0.1), ScoreLinear(), Z, Z, seed=1, score_cap=40)
    s.run_until(100.0)
    assert s.stat("overflows") > 0
    assert s.stat("escaped_score") >= 41 * s.stat("overflows")


def test_rebuild_keeps_trees_consistent():
    s = SimState(50, ModelParams(1.0, 1.0, 1.0), RatioPower(2.0), Z, Z, seed=2, score_cap=500)
    s.run_until(20.0)
    tree = s.wtree.copy()
    s._rebuild()
    assert np.allclose(tree, s.wtree, rtol=1e-9, atol=1e-9)


def test_bad_inputs():
    with pytest.raises(ValueError):
        SimState(0, UNIT, Uniform(), Z, Z)
    with pytest.raises(ValueError):
        SimState(5, UNIT, Uniform(), Z, degenerate(50), score_cap=10)
    with pytest.raises(ValueError):
        simulate(5, UNIT, Uniform(), Z, Z, 0.0)


def test_compare_identical_is_zero():
    mf = integrate(MeanFieldState.empty(60), UNIT, Uniform(), Z, Z, 10.0)
    emp = EmpiricalTrajectory(mf.t, list(mf.r), mf.masses(), mf.mean_scores(), np.zeros(len(mf.t)),
                              np.zeros(len(mf.t)), {})
    rep = compare_to_meanfield(emp, mf)
    assert rep.max_sup_error == 0.0 and rep.max_mass_error == 0.0
    assert not rep.herding


def test_compare_grid_mismatch():
    mf = integrate(MeanFieldState.empty(60), UNIT, Uniform(), Z, Z, 10.0)
    emp = simulate(50, UNIT, Uniform(), Z, Z, 12.0)
    with pytest.raises(ValueError):
        compare_to_meanfield(emp, mf)


def test_outputs(tmp_path):
    emp = simulate(40, UNIT, Uniform(), Z, Z, 5.0, seed=9)
    write_csv(emp, tmp_path / "t.csv", prefix=4)
    write_sidecar(emp, tmp_path / "t.json")
    with open(tmp_path / "t.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "mass", "mean_score", "top_score", "overflow_count", "r1", "r2", "r3", "r4"]
    assert float(rows[-1][1]) == emp.mass[-1]
    meta = json.loads((tmp_path / "t.json").read_text())
    assert meta["seed"] == 9 and meta["stats"] == emp.stats and meta["policy"] == {"type": "uniform"}
