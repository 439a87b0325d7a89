import csv
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from herding.distributions import degenerate, make_prob_seq
from herding.meanfield import (IntegrationError, MeanFieldState, ModelParams, cesaro, check_truncation,
                               integrate, mass, mass_balance_residual, mass_bound, mean_score, rhs,
                               write_csv)
from herding.policies import CumulativeF, RatioPower, ScoreLinear, Uniform, WeightTable

Z = degenerate(1)
UNIT = ModelParams(1.0, 1.0, 1.0)


@pytest.fixture(scope="module")
def uniform_run():
    return integrate(MeanFieldState.empty(200), UNIT, Uniform(), Z, Z, 200.0)


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        ModelParams(-1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        ModelParams(1.0, math.nan, 1.0)


def test_rhs_empty_state_only_creates():
    s = MeanFieldState.empty(60)
    for pol in (Uniform(), RatioPower(2.0), ScoreLinear(), CumulativeF.power(2.0)):
        d, esc = rhs(s, ModelParams(3.0, 1.0, 3.0), pol, Z, degenerate(50))
        expected = np.zeros(60)
        expected[49] = 3.0
        assert np.array_equal(d, expected)
        assert esc == 0.0


def test_rhs_pure_decay():
    r = np.zeros(10)
    r[0] = 1.0
    d, _ = rhs(MeanFieldState(r), ModelParams(0.0, 0.0, 1.0), Uniform(), Z, Z)
    assert d[0] == -1.0 and not d[1:].any()


def test_rhs_vanishes_at_stationary_profile():
    k = np.arange(1, 81)
    d, _ = rhs(MeanFieldState(2.0 ** (1 - k)), UNIT, Uniform(), Z, Z)
    # truncation at 80 leaves a 2**-79 boundary defect
    assert np.max(np.abs(d)) <= 1e-8


def test_window_too_small():
    with pytest.raises(ValueError):
        rhs(MeanFieldState.empty(10), UNIT, Uniform(), Z, degenerate(50))


def test_decay_ode():
    r = np.zeros(20)
    r[0] = 1.0
    tr = integrate(MeanFieldState(r), ModelParams(0.0, 0.0, 1.0), Uniform(), Z, Z, 1.0, dt_sample=0.5,
                   rtol=1e-10, atol=1e-12)
    assert tr.r[-1, 0] == pytest.approx(math.exp(-1.0), abs=1e-6)
    assert tr.t[-1] == 1.0


def test_creation_ode():
    tr = integrate(MeanFieldState.empty(20), ModelParams(1.0, 0.0, 1.0), Uniform(), Z, Z, 3.0,
                   rtol=1e-10, atol=1e-12)
    assert tr.r[:, 0] == pytest.approx(1.0 - np.exp(-tr.t), abs=1e-6)


def test_uniform_converges(uniform_run):
    k = np.arange(1, 201)
    at60 = uniform_run.state(60)
    assert at60.t == 60.0
    assert np.max(np.abs(at60.r - 2.0 ** (1 - k))) <= 1e-4
    assert check_truncation(uniform_run) <= 1e-10


def test_uniform_mass_balance(uniform_run):
    assert mass_balance_residual(uniform_run, UNIT, Uniform(), Z, Z) <= 1e-8


def test_cesaro_limits(uniform_run):
    assert cesaro(uniform_run, uniform_run.r[:, 0]) == pytest.approx(1.0, abs=2e-2)
    assert cesaro(uniform_run, uniform_run.masses()) <= mass_bound(UNIT, Z, Z) + 2e-2
    assert cesaro(uniform_run, np.full(len(uniform_run.t), 3.5)) == pytest.approx(3.5)
    assert cesaro(uniform_run, lambda tr: tr.masses()) == cesaro(uniform_run, uniform_run.masses())


def test_mass_and_mean():
    k = np.arange(1, 41)
    assert mass(MeanFieldState(2.0 ** (1 - k))) == pytest.approx(2.0, abs=1e-11)
    assert mass(MeanFieldState.empty(5)) == 0.0
    with pytest.raises(ValueError):
        mean_score(MeanFieldState.empty(5))
    flat = MeanFieldState(np.r_[np.ones(50), np.zeros(10)])
    assert mass(flat) == 50.0
    assert mean_score(flat) == 25.5


def test_alpha_zero_fixed_point():
    flat = MeanFieldState(np.r_[np.ones(50), np.zeros(10)])
    d, _ = rhs(flat, ModelParams(3.0, 0.0, 3.0), Uniform(), Z, degenerate(50))
    assert not d.any()


def test_determinism():
    p = ModelParams(3.0, 2.0, 3.0)
    a = integrate(MeanFieldState.empty(120), p, RatioPower(2.0), Z, Z, 20.0)
    b = integrate(MeanFieldState.empty(120), p, RatioPower(2.0), Z, Z, 20.0)
    assert np.array_equal(a.r, b.r) and np.array_equal(a.escaped, b.escaped)


def test_condensed_run_escapes():
    p = ModelParams(3.0, 3.0, 3.0)
    tr = integrate(MeanFieldState.empty(100), p, RatioPower(2.0), Z, Z, 100.0)
    assert np.all(np.diff(tr.escaped) >= 0)
    assert tr.escaped[-1] > 0.0
    assert tr.escaped[-1] > 2 * tr.escaped[50]
    assert np.all(tr.r >= 0)
    assert mass_balance_residual(tr, p, RatioPower(2.0), Z, Z) <= 1e-8
    with pytest.raises(IntegrationError):
        check_truncation(tr)


def test_bad_horizon():
    with pytest.raises(ValueError):
        integrate(MeanFieldState.empty(10), UNIT, Uniform(), Z, Z, 0.0)


def test_csv_round_trip(tmp_path, uniform_run):
    path = tmp_path / "traj.csv"
    write_csv(uniform_run, path, prefix=5)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "r1", "r2", "r3", "r4", "r5", "mass", "mean_score", "escaped_mass"]
    assert len(rows) == len(uniform_run.t) + 1
    assert float(rows[-1][1]) == uniform_run.r[-1, 0]
    assert float(rows[-1][6]) == uniform_run.masses()[-1]


policies = st.sampled_from([Uniform(), RatioPower(0.8), RatioPower(2.0), ScoreLinear(),
                            WeightTable((0.2, 0.5, 0.9)), CumulativeF.power(2.0)])
thetas = st.sampled_from([Z, make_prob_seq({5: 0.6, 15: 0.4}), make_prob_seq({1: 0.5, 3: 0.5})])


@given(policies, thetas, st.lists(st.floats(0.0, 5.0), min_size=1, max_size=30),
       st.floats(0.0, 5.0), st.floats(0.0, 5.0), st.floats(0.1, 5.0))
def test_mass_balance_property(pol, theta, head, lam, alpha, mu):
    L = 60
    r = np.zeros(L)
    r[:len(head)] = head
    d, esc = rhs(MeanFieldState(r), ModelParams(lam, alpha, mu), pol, theta, degenerate(2))
    scale = 1.0 + lam + mu * sum(head) + alpha
    assert math.fsum(d) + esc == pytest.approx(lam - mu * r[0], abs=1e-12 * scale)
