import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from herding import closed_forms as C
from herding import stationary as S
from herding.distributions import degenerate, make_prob_seq
from herding.meanfield import ModelParams
from herding.policies import RatioPower, Uniform

Z = degenerate(1)


def test_uniform_gf_value():
    assert C.uniform_policy_gf(ModelParams(1, 1, 1), Z, Z, 0.5) == pytest.approx(2 / 3, rel=1e-14)
    assert C.uniform_policy_gf(ModelParams(1, 1, 1), Z, Z, 0.0) == 0.0
    assert C.uniform_policy_total(ModelParams(1, 1, 1), Z, Z) == 2.0
    with pytest.raises(ValueError):
        C.uniform_policy_gf(ModelParams(1, 1, 1), Z, Z, 1.0)


def test_uniform_gf_tends_to_total():
    p = ModelParams(2, 1.5, 3)
    theta, phi = make_prob_seq({1: 0.3, 4: 0.7}), degenerate(3)
    assert C.uniform_policy_gf(p, theta, phi, 1 - 1e-7) == pytest.approx(C.uniform_policy_total(p, theta, phi),
                                                                         rel=1e-5)


def _taylor_oracle(p, theta, phi, n):
    """Coefficients of the compact uniform-policy formula by mpmath series expansion."""
    mpmath.mp.dps = 40
    th = lambda z: sum(m * z**s for s, m in theta.as_dict().items())  # noqa: E731
    ph = lambda z: sum(m * z**s for s, m in phi.as_dict().items())  # noqa: E731
    th1 = sum(s * m for s, m in theta.as_dict().items())
    ph1 = sum(s * m for s, m in phi.as_dict().items())
    r1 = (p.alpha * th1 + p.lam * ph1) / p.mu

    def r(z):
        # multiplied through by z to remove the removable singularity at 0
        return p.lam * r1 * (ph(z) - 1) * z / (p.alpha * (1 - th(z)) * z + p.mu * r1 * (z - 1))

    coeffs = mpmath.taylor(r, 0, n)
    mpmath.mp.dps = 15
    return np.array([float(c) for c in coeffs[1:]])


@pytest.mark.parametrize("p,theta,phi", [
    (ModelParams(1, 1, 1), Z, Z),
    (ModelParams(2, 1.5, 3), make_prob_seq({1: 0.3, 4: 0.7}), degenerate(3)),
    (ModelParams(3, 2, 3), make_prob_seq({5: 0.6, 15: 0.4}), make_prob_seq({2: 0.5, 6: 0.5})),
])
def test_uniform_gf_coefficients_match_solver(p, theta, phi):
    sol = S.solve(p, Uniform(), theta, phi)
    oracle = _taylor_oracle(p, theta, phi, 25)
    assert np.max(np.abs(sol.r[:25] - oracle)) <= 1e-10
    for z in (0.2, 0.6, 0.9):
        k = np.arange(1, len(sol.r) + 1)
        assert C.uniform_policy_gf(p, theta, phi, z) == pytest.approx(math.fsum(sol.r * z**k), rel=1e-9)


def test_alpha_zero():
    r, r1, rp1 = C.alpha_zero_solution(ModelParams(3, 0, 3), degenerate(50))
    assert np.array_equal(r, np.ones(50)) and r1 == 50 and rp1 == 1275 and rp1 / r1 == 25.5
    r, r1, _ = C.alpha_zero_solution(ModelParams(2, 0, 4), Z)
    assert list(r) == [0.5] and r1 == 0.5
    with pytest.raises(ValueError):
        C.alpha_zero_solution(ModelParams(2, 1, 4), Z)


def test_lerch_values():
    assert C.lerch(0.0, 2.0) == 1.0
    assert C.lerch(1.0, 2.0) == pytest.approx(math.pi**2 / 6, abs=1e-13)
    with pytest.raises(ValueError):
        C.lerch(1.0, 1.0)


@given(st.floats(1e-3, 0.99), st.floats(0.2, 4.0), st.floats(0.5, 5.0))
def test_lerch_against_mpmath(x, g, v):
    assert C.lerch(x, g, v) == pytest.approx(float(mpmath.lerchphi(x, g, v)), rel=1e-11)


@pytest.mark.parametrize("x", [0.3, 0.7])
@pytest.mark.parametrize("g", [0.8, 1.5, 2.5])
def test_F_is_lerch_minus_one(x, g):
    assert S.F_series(x, RatioPower(g), Z) == pytest.approx(C.lerch(x, g) - 1, abs=1e-10)


def test_trichotomy():
    assert [C.trichotomy(g) for g in (0.8, 1.0, 1.5, 2.0, 2.5)] == [
        C.REGIME_ALWAYS, C.REGIME_ALWAYS, C.REGIME_DIVERGENT, C.REGIME_DIVERGENT, C.REGIME_BOUNDED]


def test_default_grid():
    xs = C.default_x_grid()
    assert xs[0] == 0.01 and 0.99 in xs
    assert np.all(np.diff(xs) > 0) and xs[-1] < 1


def test_figure_curves_increasing():
    grid = np.linspace(0.05, 0.995, 40)
    rows = C.figure_sweep([0.8, 1.5, 2.5], x_grid=grid)
    assert len(rows) == 120
    for g in (0.8, 1.5, 2.5):
        curve = [r for r in rows if r.gamma == g]
        a = np.array([r.alpha for r in curve])
        s = np.array([r.r_prime_1 for r in curve])
        assert np.all(np.diff(a) > 0) and np.all(np.diff(s) > 0)
        assert {r.regime for r in curve} == {C.trichotomy(g)}


def test_figure_endpoints():
    a, s = C.figure_endpoints(2.5)
    assert a == pytest.approx(3 * float(mpmath.zeta(2.5) - 1), abs=1e-10)
    assert s == pytest.approx(float(mpmath.zeta(1.5) - mpmath.zeta(2.5)), abs=1e-10)
    a, s = C.figure_endpoints(1.5)
    assert math.isfinite(a) and s == math.inf
    assert C.figure_endpoints(0.8) == (math.inf, math.inf)


def test_figure_rejects_bad_grid():
    with pytest.raises(ValueError):
        C.figure_sweep([2.0], x_grid=[0.5, 1.0])


def test_figure_csv(tmp_path):
    rows = C.figure_sweep([2.5], x_grid=[0.25, 0.5])
    C.write_figure_csv(rows, tmp_path / "f.csv")
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "gamma,x,alpha,r_prime_1"
    assert float(lines[1].split(",")[2]) == rows[0].alpha
