import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, special

from lastsuccess import logseries as LSM
from lastsuccess import mixture
from lastsuccess.exceptions import ConvergenceError
from lastsuccess.logseries import F, Hyp2F1Params, P_hyp, Q_hyp
from lastsuccess.priors import GameState, logseries
from lastsuccess.profiles import records

LS = logseries(1.0)
XGRID = np.linspace(0.01, 0.99, 50)
LATTICE = [(a, b, c) for a in (0.5, 1.0, 2.0, 3.5, 7.0) for b in (1.0, 1.5, 3.0) for c in (2.0, 4.5, 8.0)]


def Lg(x):
    return -math.log1p(-x)


# -- hypergeometric function --------------------------------------------------

def test_hyp_at_zero():
    assert F(2.5, 1.5, 4.0, 0.0) == 1.0


def test_hyp_log_identity():
    for x in XGRID:
        assert F(1, 1, 2, x) == pytest.approx(Lg(x) / x, rel=1e-12)


def test_transformation_consistency():
    for a, b, c in LATTICE:
        for x in (0.1, 0.4, 0.6, 0.8, 0.9, 0.97):
            assert LSM.hyp2f1_direct(a, b, c, x) == pytest.approx(LSM.hyp2f1_transformed(a, b, c, x), rel=1e-11)


def test_against_scipy_and_mpmath():
    for a, b, c in LATTICE:
        for x in (0.05, 0.5, 0.9, 0.99):
            ref = float(mp.hyp2f1(a, b, c, x))
            assert F(a, b, c, x) == pytest.approx(ref, rel=1e-12)
            assert F(a, b, c, x) == pytest.approx(special.hyp2f1(a, b, c, x), rel=1e-11)


@given(st.floats(0.1, 6), st.floats(0.1, 6), st.floats(0.2, 10), st.floats(0.0, 0.95))
def test_hyp_property(a, b, c, x):
    assert LSM.hyp2f1(Hyp2F1Params(a, b, c, x)) == pytest.approx(float(mp.hyp2f1(a, b, c, x)), rel=1e-10)


@pytest.mark.parametrize("k", [1, 2, 5, 12])
def test_differentiation_formula(k):
    h = 1e-4
    for x in (0.2, 0.5, 0.8):
        f = lambda u: F(k, k, k + 1, u)
        fd = (8 * (f(x + h) - f(x - h)) - (f(x + 2 * h) - f(x - 2 * h))) / (12 * h)
        assert fd == pytest.approx(k * k / (k + 1) * F(k + 1, k + 1, k + 2, x), rel=1e-8)


def test_params_validation():
    with pytest.raises(ValueError):
        Hyp2F1Params(1, 1, 2, 1.0)
    with pytest.raises(ValueError):
        Hyp2F1Params(1, 1, -2, 0.5)
    assert Hyp2F1Params(1, 1, 2, 0.5).euler_ok
    assert not Hyp2F1Params(1, 3, 2, 0.5).euler_ok


# -- P and Q -------------------------------------------------------------------

def test_closed_forms():
    for x in XGRID:
        L = Lg(x)
        assert P_hyp(1, x) == pytest.approx(L / x, rel=1e-10)
        assert Q_hyp(1, x) == pytest.approx(L * L / (2 * x), rel=1e-10)
        assert 2 * P_hyp(2, x) == pytest.approx(LSM.P2_display(x), rel=1e-10)
        assert 2 * Q_hyp(2, x) == pytest.approx(LSM.Q2_display(x), rel=1e-10)


@pytest.mark.parametrize("k", [1, 2, 5, 20, 50])
def test_euler_vs_series(k):
    for x in (0.01, 0.3, 0.7, 0.9, 0.99):
        assert LSM.P_euler(k, x) == pytest.approx(P_hyp(k, x), rel=1e-9)
        assert Q_hyp(k, x) == pytest.approx(LSM.Q_param_series(k, x), rel=1e-9)


def test_euler_integral_in_y():
    # the untransformed integral k * int y^(k-1) (1-xy)^(-k) dy is F(k, k, k+1; x) = k P_k
    for k, x in ((1, 0.5), (3, 0.8), (6, 0.9)):
        val = integrate.quad(lambda y: y ** (k - 1) * (1 - x * y) ** (-k), 0, 1, epsabs=1e-14, epsrel=1e-13)[0]
        assert k * val == pytest.approx(k * P_hyp(k, x), rel=1e-10)
        q = integrate.quad(lambda y: y ** (k - 1) * -math.log1p(-x * y) * (1 - x * y) ** (-k), 0, 1,
                           epsabs=1e-14, epsrel=1e-13)[0]
        assert q == pytest.approx(Q_hyp(k, x), rel=1e-10)


@pytest.mark.parametrize("k,x", [(1, 0.4), (2, 0.7), (4, 0.9)])
def test_Q_is_parameter_derivative(k, x):
    mp.mp.dps = 30
    d = mp.diff(lambda a: mp.hyp2f1(a, k, k + 1, x), k)
    assert Q_hyp(k, x) == pytest.approx(float(d) / k, rel=1e-11)


@given(st.integers(1, 30), st.floats(0.001, 0.95))
def test_dual_route_power_series(k, x):
    P, Q = mixture.series_PQ(LS, records(), k, x)
    assert P == pytest.approx(P_hyp(k, x), rel=1e-10)
    assert Q == pytest.approx(Q_hyp(k, x), rel=1e-10)


@pytest.mark.parametrize("k", [1, 2, 5])
def test_recursions(k):
    h = 1e-5
    for x in (0.2, 0.6, 0.9):
        dP = (P_hyp(k, x + h) - P_hyp(k, x - h)) / (2 * h)
        dQ = (Q_hyp(k, x + h) - Q_hyp(k, x - h)) / (2 * h)
        assert dP == pytest.approx(k * P_hyp(k + 1, x), rel=1e-7)
        assert dQ == pytest.approx(P_hyp(k + 1, x) + k * Q_hyp(k + 1, x), rel=1e-7)


def test_Q_param_series_cap():
    with pytest.raises((ConvergenceError, ValueError)):
        LSM.Q_param_series(3, 1.0)


# -- quotient monotonicity -------------------------------------------------------------

def test_quotient_monotone():
    assert LSM.quotient_monotonicity(10, np.linspace(0.005, 0.99, 100))


def test_quotient_small_x():
    x = 1e-4
    for k in (1, 2, 5):
        assert Q_hyp(k, x) / P_hyp(k, x) == pytest.approx(k * x / (k + 1), rel=1e-3)


# -- bygone value -----------------------------------------------------------------

def test_bygone_table_matches_pointwise():
    x = np.array([0.1, 0.5, 0.63, 0.9, 0.999])
    tab = LSM.bygone_table(60, x)
    for k in (1, 2, 17, 60):
        for i, xx in enumerate(x):
            assert tab[k - 1, i] == pytest.approx(LSM.bygone_value(k, xx), rel=1e-12)
            if xx < 0.99:
                assert tab[k - 1, i] == pytest.approx(mixture.mixture_S0(LS, records(), GameState.from_x(xx, k, 1.0)), rel=1e-11)


def test_bygone_rows_descending_generator():
    x = np.array([0.3, 0.8])
    rows = list(LSM.bygone_rows_desc(40, x, block=8))
    tab = LSM.bygone_table(40, x)
    assert [k for k, _ in rows] == list(range(40, 0, -1))
    for k, r in rows:
        assert r == pytest.approx(tab[k - 1], rel=1e-13)


def test_bygone_decreases_to_horizon_value():
    for x in (0.3, 0.8):
        v = [LSM.bygone_value(k, x) for k in (1, 5, 50, 500)]
        assert v == sorted(v, reverse=True) and v[-1] > 1 - x


# -- trap integrals ------------------------------------------------------------------

def test_R_integral_examples():
    for x in (0.3, 0.8):
        assert LSM.R_integral(1, x, 0.0) == pytest.approx(Lg(x) ** 2 / (2 * x), abs=1e-9)
        assert LSM.R_integral(3, x, 1.0) == 0.0
    assert LSM.R_integral(2, 0.7, 0.4) == pytest.approx(mixture.series_R(LS, records(), 2, 0.7, 0.4), abs=1e-8)


def test_R0_integral():
    assert LSM.R0_integral(0.6, 1.0) == 0.0
    for z in (0.2, 0.5, 0.9):
        assert LSM.R0_integral(1e-7, z) == pytest.approx(1 - z, abs=1e-6)
        for x in (0.01, 0.5, 0.9):
            series = mixture.mixture_S1(logseries(x), records(), GameState(0.0, 0), z)
            assert LSM.R0_integral(x, z) == pytest.approx(series, abs=1e-10)
            assert 0.0 <= LSM.R0_integral(x, z) <= 1.0


@pytest.mark.slow
def test_R0_integral_monte_carlo():
    from lastsuccess.simulate import ZTrap, estimate
    res = estimate(ZTrap(0.37), logseries(0.8), records(), GameState(0.0, 0), 10 ** 6, seed=11)
    assert res.within(LSM.R0_integral(0.8, 0.37))


def test_best_trap_against_grid():
    for k, x in ((1, 0.9), (2, 0.755984), (5, 0.7)):
        z, val = LSM.best_trap(k, x)
        zs = np.linspace(0, 1, 401)
        grid = max(LSM.R_integral(k, x, zz) for zz in zs)
        assert val >= grid - 1e-12
        assert val - grid < 1e-5 * val


@pytest.mark.parametrize("k,rho", [(1, 0.850335), (5, 0.680814), (10, 0.656028)])
def test_rho_examples(k, rho):
    assert LSM.rho_balance(k) == pytest.approx(rho, abs=1e-6)


# -- limits and pacing process ------------------------------------------------------

def test_myopic_cutoff_limit_converges():
    q = 0.9
    lim = 1 - (1 - math.exp(-1)) / q
    err = {k: abs(mixture.cutoffs(logseries(q), records(), k)[0] - lim) for k in (10, 20, 50)}
    assert err[10] > err[20] > err[50]
    # the error shrinks like 1/k
    assert err[50] * 50 == pytest.approx(err[20] * 20, rel=0.15)


@pytest.mark.xfail(strict=True, reason="a_k approaches its limit like 0.26/k; error at k=50 is 5e-3")
def test_myopic_cutoff_limit_k50():
    q = 0.9
    a50 = mixture.cutoffs(logseries(q), records(), 50)[0]
    assert abs(a50 - (1 - (1 - math.exp(-1)) / q)) < 1e-3


def test_alpha1_is_root_of_L_equals_2():
    assert mixture.root_alpha(LS, records(), 1) == pytest.approx(1 - math.exp(-2), abs=1e-12)


def test_pacing_process():
    assert LSM.polya_lundberg_rate(GameState(0.0, 1), 0.5) == pytest.approx(1.0)
    assert LSM.polya_lundberg_rate(GameState(0.5, 2), 1.0) == pytest.approx(4.0)
    with pytest.raises(ValueError):
        LSM.polya_lundberg_rate(GameState(0.0, 1), 1.0)
    for q in (0.2, 0.9):
        tot = integrate.quad(lambda t: LSM.t1_density(t, q), 0, 1, epsabs=1e-14)[0]
        assert tot == pytest.approx(1.0, abs=1e-10)
