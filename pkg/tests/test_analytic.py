import math

import numpy as np
import pytest
from scipy import integrate

from fdrelay.analytic import (
    Kind,
    cf_outage_upper,
    cf_rate_gap_check,
    cf_slab_bound,
    df_joint_success,
    df_outage_exact,
    df_outage_upper,
    df_relay_fails_dt_success,
    df_spatial_contention,
    dt_outage,
    sdf_outage_lower,
)
from fdrelay.experiments import rate_gap_grid
from fdrelay.laplace import LaplaceEvaluator, marginal_laplace
from fdrelay.model import NetworkScenario, delta, threshold_T

MID = NetworkScenario(D=10.0, relay=(5.0, 0.0), alpha=4.0, lam=1e-4, rate=0.5)
EQUI = MID.replace(relay=(5.0, 5.0 * math.sqrt(3)))


def with_relay_distance(rd, sc=EQUI):
    """Relay on the circle ``|r| = 10`` at distance ``rd`` from the destination."""
    D = sc.D
    x = (2 * D * D - rd * rd) / (2 * D)
    return sc.replace(relay=(x, math.sqrt(D * D - x * x)))


def test_dt_examples():
    assert dt_outage(MID.replace(lam=0.0)).value == 0.0
    v = dt_outage(MID)
    assert v.kind is Kind.EXACT
    assert v.value == pytest.approx(1 - math.exp(-1e-4 * delta(0.5, 4) * 100), rel=1e-14)
    assert dt_outage(MID.replace(lam=1e3)).value == pytest.approx(1.0)


@pytest.mark.parametrize("fn", [df_outage_exact, df_outage_upper, dt_outage])
def test_zero_density_means_no_outage(fn):
    assert fn(MID.replace(lam=0.0)).value == 0.0


def test_zero_density_other_terms():
    sc = MID.replace(lam=0.0)
    assert df_joint_success(sc) == 1.0
    assert df_relay_fails_dt_success(sc) == 0.0
    assert sdf_outage_lower(sc, 0.5).value == 0.0
    assert cf_outage_upper(sc, 1.0).value == 0.0


def test_fully_correlated_symbols_reduce_to_direct_link():
    assert df_joint_success(MID, 1.0) == 0.0
    g = MID.gains()
    T = threshold_T(MID.rate)
    assert df_relay_fails_dt_success(MID, 1.0) == pytest.approx(
        marginal_laplace(T / g.l_sd, MID.lam, MID.alpha), rel=1e-12)
    assert df_outage_exact(MID, 1.0).value == pytest.approx(dt_outage(MID).value, rel=1e-10)


def test_outage_is_sum_of_complementary_events():
    ev = LaplaceEvaluator(MID.replace(relay=(3.0, 2.0)))
    sc = ev.scenario
    for rho in (0.0, 0.5):
        total = 1 - df_joint_success(sc, rho, ev) - df_relay_fails_dt_success(sc, rho, ev)
        assert df_outage_exact(sc, rho, ev).value == pytest.approx(total, rel=1e-9)


def test_degenerate_branch_is_continuous():
    assert EQUI.dist_rd == pytest.approx(EQUI.D)
    mid = df_outage_exact(EQUI).value
    for f in (1 - 1e-4, 1 + 1e-4):
        near = df_outage_exact(with_relay_distance(EQUI.D * f)).value
        assert mid == pytest.approx(near, rel=1e-3)


def test_relay_further_from_destination_is_worse():
    # same |r| = 2, growing |r - d|
    ops = [df_outage_exact(MID.replace(relay=r)).value for r in ((2.0, 0.0), (0.0, 2.0), (-2.0, 0.0))]
    assert ops[0] < ops[1] < ops[2]


def test_fig1_shape_bound_above_exact_below_direct():
    for r in ((2.0, 0.0), (5.0, 0.0)):
        for lam in (1e-5, 1e-4, 1e-3):
            sc = MID.replace(relay=r, lam=lam)
            ex = df_outage_exact(sc).value
            assert ex <= df_outage_upper(sc).value + 1e-12
            assert ex <= dt_outage(sc).value


def test_upper_bound_tight_close_to_source():
    for lam in (1e-5, 1e-4):
        sc = MID.replace(relay=(2.0, 0.0), lam=lam)
        ex = df_outage_exact(sc).value
        assert ex <= 0.05
        assert df_outage_upper(sc).value <= 1.1 * ex


def test_correlation_zero_is_optimal():
    for lam in (1e-4, 1e-3):
        for r in ((2.0, 0.0), (5.0, 0.0)):
            sc = MID.replace(relay=r, lam=lam, rate=1.0)
            ev = LaplaceEvaluator(sc)
            ops = [df_outage_exact(sc, rho, ev).value for rho in np.arange(10) / 10]
            assert int(np.argmin(ops)) == 0


def test_spatial_contention_examples():
    d = delta(0.5, 4)
    assert df_spatial_contention(MID) == pytest.approx(45 * d, rel=1e-12)
    near_d = df_spatial_contention(MID.replace(relay=(10.0 - 1e-6, 0.0)))
    # r^2 = (D - 1e-6)^2 sits 2e-7 below D^2
    assert near_d == pytest.approx(100 * d, rel=1e-6)


def test_small_density_slope_approaches_from_below():
    kappa = df_spatial_contention(MID)
    ratios = [df_outage_exact(MID.replace(lam=lam)).value / lam for lam in (1e-5, 1e-6, 1e-7)]
    assert ratios[0] >= ratios[1] >= ratios[2]
    assert all(r <= kappa for r in ratios)


@pytest.mark.parametrize("fn", [
    lambda sc: dt_outage(sc).value,
    lambda sc: df_outage_exact(sc).value,
    lambda sc: df_outage_exact(sc, 0.5).value,
    lambda sc: df_outage_upper(sc).value,
    lambda sc: sdf_outage_lower(sc, 0.5).value,
    lambda sc: cf_outage_upper(sc, 1.0, 16).value,
])
def test_monotone_in_rate_and_density(fn):
    sc = MID.replace(relay=(4.0, 2.0), lam=3e-4)
    by_rate = [fn(sc.replace(rate=r)) for r in (0.25, 0.5, 1.0, 2.0)]
    by_lam = [fn(sc.replace(lam=lam)) for lam in (1e-5, 1e-4, 1e-3)]
    assert all(b >= a - 1e-9 for a, b in zip(by_rate, by_rate[1:]))
    assert all(b >= a - 1e-9 for a, b in zip(by_lam, by_lam[1:]))


def test_sdf_bound_tends_to_direct_link():
    v = sdf_outage_lower(MID, 1 - 1e-6).value
    assert v == pytest.approx(dt_outage(MID).value, rel=1e-3)
    assert v <= dt_outage(MID).value


def test_sdf_bound_validation():
    with pytest.raises(ValueError):
        sdf_outage_lower(MID, 0.0)
    with pytest.raises(ValueError):
        sdf_outage_lower(MID, 1.0)


def exact_fading_probability(a, b, T):
    """``P(a*W1 + b*W2 < T)`` for unit exponentials by direct 2-D integration."""
    val, _ = integrate.dblquad(lambda w2, w1: math.exp(-w1 - w2), 0, T / a,
                               0, lambda w1: (T - a * w1) / b, epsabs=1e-13, epsrel=1e-11)
    return val


@pytest.mark.parametrize("I_d, I_r, nc", [(1e-3, 2e-3, 0.01), (5e-4, 1e-4, 1e-3),
                                          (2e-3, 2e-3, 0.2)])
def test_slab_staircase_bounds_fixed_interference_outage(I_d, I_r, nc):
    g = MID.replace(relay=(3.0, 1.0)).gains()
    T = threshold_T(1.5)

    def joint(pairs):
        return [math.exp(-w1 * I_d - w2 * I_r) for w1, w2 in pairs]

    def marginal_r(w):
        return math.exp(-w * I_r)

    exact = exact_fading_probability(g.l_sd / I_d, g.l_sr / (I_r + nc), T)
    bounds = [cf_slab_bound(T, nc, g.l_sr, g.l_sd, n, joint, marginal_r) for n in (1, 8, 64, 4096)]
    assert all(b >= exact - 1e-12 for b in bounds)
    assert all(b2 <= b1 + 1e-15 for b1, b2 in zip(bounds, bounds[1:]))
    assert bounds[-1] == pytest.approx(exact, rel=1e-2, abs=1e-6)


def test_cf_bound_non_increasing_in_slabs():
    sc = MID.replace(relay=(8.0, 0.0), lam=1e-3)
    ev = LaplaceEvaluator(sc)
    vals = [cf_outage_upper(sc, 0.05, n, ev).value for n in (1, 8, 64)]
    assert vals[0] >= vals[1] >= vals[2]
    assert 0 <= vals[2] <= 1


def test_cf_bound_validation():
    with pytest.raises(ValueError):
        cf_outage_upper(MID, 0.0)
    with pytest.raises(ValueError):
        cf_outage_upper(MID, 1.0, 0)


def test_rate_gap_on_deterministic_grid():
    correlated, uncorrelated = rate_gap_grid()
    assert correlated.size > 1000
    assert cf_rate_gap_check(correlated, uncorrelated).all()
    assert cf_rate_gap_check(1.0, 1.5) is True
    assert cf_rate_gap_check(0.0, 1.5) is False


def test_evaluator_geometry_must_match():
    with pytest.raises(ValueError):
        df_outage_exact(MID, 0.0, LaplaceEvaluator(MID.replace(relay=(2.0, 0.0))))
