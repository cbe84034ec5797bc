import json
import math

import mpmath
import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from clfree.errors import ConstraintViolation, DomainError
from clfree.params import (
    Mode, ProcessParams, S_scale, derive_params, eval_f, eval_q, eval_trajectory_bundle, f_traj, h_traj,
    max_eps, min_W, predicted_open, simulation_params, x_deriv, x_minus, x_plus, x_traj,
)

mpmath.mp.dps = 40


# --- derive_params -----------------------------------------------------------

def test_p_for_n512_ell4():
    prm = simulation_params(512, 4, mu_hat=1.0)
    assert prm.p == 1 / 64


def test_u_r_k_for_n512_ell4():
    prm = simulation_params(512, 4, mu_hat=1.0)
    u = int(mpmath.floor(512 * mpmath.mpf(1) / 64 * mpmath.log(512) ** (mpmath.mpf(1) / 3)))
    assert u == 14
    assert prm.u == u
    assert prm.r == 512
    # floor(u/60) is 0 here; k is clamped to its invariant k >= 1
    assert prm.k == max(1, u // 60) == 1


def test_ell_three_rejected():
    with pytest.raises(DomainError):
        simulation_params(100, 3)


def test_n_not_above_ell_rejected():
    with pytest.raises(DomainError):
        simulation_params(5, 5)


def test_simulation_needs_hats():
    with pytest.raises(DomainError):
        derive_params(100, 4, Mode.SIMULATION, mu_hat=0.4)


def test_simulation_positivity():
    with pytest.raises(ConstraintViolation, match="eps_hat"):
        derive_params(100, 4, Mode.SIMULATION, mu_hat=0.4, eps_hat=-1.0, W_hat=1.0)


def test_analysis_mode_constraints_named():
    with pytest.raises(ConstraintViolation, match="W >="):
        derive_params(10**6, 4, Mode.ANALYSIS, W_hat=10.0)
    with pytest.raises(ConstraintViolation, match="eps <="):
        derive_params(10**6, 4, Mode.ANALYSIS, eps_hat=0.01)
    with pytest.raises(ConstraintViolation, match="mu"):
        derive_params(10**6, 4, Mode.ANALYSIS, mu_hat=1.0)


@pytest.mark.parametrize("ell", [4, 5, 6, 8])
def test_analysis_mu_is_maximal(ell):
    prm = derive_params(10**6, ell, Mode.ANALYSIS)
    assert prm.W == min_W(ell) and prm.eps == max_eps(ell)
    assert 2 * prm.W * prm.mu ** (ell - 1) <= prm.eps
    up = math.nextafter(prm.mu, 1.0)
    assert 2 * prm.W * up ** (ell - 1) > prm.eps or up == prm.mu


@given(st.integers(20, 5000), st.integers(4, 8))
def test_invariants(n, ell):
    if n <= ell:
        return
    try:
        prm = simulation_params(n, ell)
    except ConstraintViolation:
        return
    assert prm.p == pytest.approx(n ** (-1.0 + 1.0 / (ell - 1)), rel=1e-14)
    assert 0 < prm.p < 1
    assert prm.m == math.floor(n * n * prm.p * prm.t_max)
    assert prm.u == math.floor(prm.gamma * n * prm.p * prm.t_max)
    assert prm.r == n // (ell - 3) and prm.r >= 1
    assert prm.k >= 1
    assert prm.tau == 40 * ell and prm.theta == 20 * ell * prm.tau
    assert prm.t_max == pytest.approx(0.4 * math.log(n) ** (1 / (ell - 1)))


def test_overrides():
    prm = simulation_params(200, 4, gamma_hat=5.0, k_hat=3)
    assert prm.gamma == 5.0 and prm.k == 3


def test_json_round_trip():
    prm = simulation_params(300, 5)
    d = json.loads(json.dumps(prm.to_dict()))
    assert set(d) >= {"n", "ell", "mode", "W", "eps", "mu", "p", "t_max", "m", "s_e", "s_o", "delta", "gamma",
                      "u", "k", "r", "tau", "theta"}
    assert ProcessParams.from_dict(d) == prm


# --- q and f -----------------------------------------------------------------

def test_q_examples():
    assert eval_q(0, 4) == 1
    assert eval_q(0.5, 4) == pytest.approx(math.exp(-1), rel=1e-15)
    assert eval_q(1, 5) == pytest.approx(1.12535e-7, rel=1e-5)
    assert eval_q(1, 5) == pytest.approx(math.exp(-16), rel=1e-15)


def test_q_negative_t():
    with pytest.raises(DomainError):
        eval_q(-0.1, 4)
    with pytest.raises(DomainError):
        eval_f(-0.1, 4, 1.0)


def test_f_examples():
    assert eval_f(0, 6, 3.0) == 1
    assert eval_f(1, 4, 50) == pytest.approx(math.exp(100), rel=1e-14)
    assert eval_f(0.5, 4, 50) == pytest.approx(float(mpmath.e ** mpmath.mpf("31.25")), rel=1e-14)


@given(st.floats(0, 3), st.floats(0, 3), st.integers(4, 9))
def test_q_decreasing_f_increasing(a, b, ell):
    lo, hi = min(a, b), max(a, b)
    W = min_W(ell)
    assert eval_q(hi, ell) <= eval_q(lo, ell)
    assert eval_f(hi, ell, 1.0) >= eval_f(lo, ell, 1.0)
    # f_j = f q^(l-3-j) only grows once W outweighs the decay of q
    with np.errstate(over="ignore"):
        for j in range(ell - 2):
            assert f_traj(hi, j, ell, W) >= f_traj(lo, j, ell, W) * (1 - 1e-12)


def test_f_j_can_decrease_for_small_W():
    assert f_traj(1.0, 0, 4, 1.0) < f_traj(0.0, 0, 4, 1.0)


def test_q_strictly_decreasing_on_grid():
    t = np.linspace(0.01, 1.2, 500)
    for ell in range(4, 9):
        assert np.all(np.diff(eval_q(t, ell)) < 0)


# --- trajectory bundle ---------------------------------------------------------

def test_bundle_at_zero():
    prm = simulation_params(400, 6)
    assert eval_trajectory_bundle(0.0, 0, prm)["x_j"] == 1
    for j in range(1, 4):
        b = eval_trajectory_bundle(0.0, j, prm)
        assert b["x_j"] == 0
        if j >= 2:
            assert b["x_plus_j"] == 0


def test_bundle_x2_ell5():
    prm = simulation_params(400, 5)
    assert eval_trajectory_bundle(0.5, 2, prm)["x_j"] == pytest.approx(math.exp(-1) / 2, rel=1e-15)
    assert math.exp(-1) / 2 == pytest.approx(0.183940, abs=1e-6)


def test_bundle_S_j():
    prm = simulation_params(400, 5)
    for j in range(3):
        assert eval_trajectory_bundle(0.1, j, prm)["S_j"] == pytest.approx(prm.k**2 * prm.r**2 * prm.p**j)
        assert S_scale(j, prm) == pytest.approx(prm.k**2 * prm.r**2 * prm.p**j)


def test_bundle_bad_j():
    prm = simulation_params(400, 5)
    with pytest.raises(DomainError):
        eval_trajectory_bundle(0.1, 3, prm)
    with pytest.raises(DomainError):
        eval_trajectory_bundle(0.1, -1, prm)


def _symbolic(j, ell):
    t, W = sp.symbols("t W", positive=True)
    q = sp.exp(-(2 * t) ** (ell - 1))
    x = (2 * t) ** j * q ** (ell - 2 - j) / sp.factorial(j)
    f = sp.exp((t ** (ell - 1) + t) * W) * q ** (ell - 3 - j)
    return t, W, x, f


@pytest.mark.parametrize("ell", [4, 5, 6, 7])
def test_derivatives_against_sympy(ell):
    for j in range(ell - 2):
        t, W, x, f = _symbolic(j, ell)
        dx = sp.lambdify(t, sp.diff(x, t), "mpmath")
        dh = sp.lambdify((t, W), sp.diff(f, t) / 2, "mpmath")
        for tv in (0.05, 0.3, 0.7, 1.1):
            ref = float(dx(mpmath.mpf(tv)))
            scale = max(abs(ref), abs(float(x_plus(tv, j, ell))), 1e-300)
            assert abs(float(x_deriv(tv, j, ell)) - ref) <= 1e-12 * scale
            assert abs(float(x_plus(tv, j, ell) - x_minus(tv, j, ell)) - ref) <= 1e-12 * scale
            href = float(dh(mpmath.mpf(tv), mpmath.mpf(2)))
            assert float(h_traj(tv, j, ell, 2.0)) == pytest.approx(href, rel=1e-12, abs=1e-300)


def test_x0_derivative_ell4_closed_form():
    t = np.linspace(0, 1.5, 31)
    q = eval_q(t, 4)
    expect = -12 * (2 * t) ** 2 * q**2
    assert np.allclose(x_deriv(t, 0, 4), expect, rtol=1e-14, atol=0)
    assert np.allclose(x_plus(t, 0, 4) - x_minus(t, 0, 4), expect, rtol=1e-14, atol=0)


@given(st.floats(0.001, 1.0), st.integers(4, 8), st.data())
def test_recursions(t, ell, data):
    j = data.draw(st.integers(1, ell - 3))
    q = eval_q(t, ell)
    assert x_plus(t, j, ell) == pytest.approx(2 * x_traj(t, j - 1, ell) / q, rel=1e-12)
    assert f_traj(t, j, ell, 1.3) == pytest.approx(f_traj(t, j - 1, ell, 1.3) / q, rel=1e-12)


@pytest.mark.parametrize("ell", [4, 5, 6])
def test_analysis_mode_growth_bounds(ell):
    # the bounds need ln n of order 1e12, so they are checked on logarithms
    prm = derive_params(10**6, ell, Mode.ANALYSIS)
    log_n = 1e12
    t_max = prm.mu * log_n ** (1 / (ell - 1))
    for t in np.linspace(0, t_max, 11):
        log_q = -((2 * t) ** (ell - 1))
        log_f = (t ** (ell - 1) + t) * prm.W
        assert 0 >= log_q >= -prm.eps / 4 * log_n
        assert 0 <= log_f + ell * log_q <= log_f <= prm.eps * log_n


def test_predicted_open():
    assert predicted_open(0.0, 100, 4) == 4950
    assert predicted_open(0.0, 100, 4, literal=True) == 5000
