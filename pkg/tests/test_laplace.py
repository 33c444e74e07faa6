import math
import threading

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fdrelay.laplace import (
    LaplaceEvaluator,
    cross_term_f,
    d_joint_laplace_dw1,
    joint_laplace,
    joint_laplace_general,
    marginal_laplace,
)
from fdrelay.model import NetworkScenario, constant_C
from fdrelay.quadrature import QuadratureSpec
from fdrelay.simulator import mc_joint_laplace

MID = NetworkScenario(D=10.0, relay=(5.0, 0.0), alpha=4.0, lam=1e-4, rate=0.5)


def cartesian_cross_term(w1, w2, sc, h, half_width=200.0):
    """Trapezoid rule of the cross-term integrand on a square grid."""
    xs = np.arange(-half_width, half_width + h / 2, h)
    dx, _ = sc.destination
    rx, ry = sc.relay
    total = 0.0
    for chunk in np.array_split(xs, 40):
        x = chunk[:, None]
        y = xs[None, :]
        pd = np.hypot(x - dx, y) ** sc.alpha
        pr = np.hypot(x - rx, y - ry) ** sc.alpha
        total += float(np.sum(w1 * w2 / ((w1 + pd) * (w2 + pr))))
    return total * h * h


def test_marginal_examples():
    assert marginal_laplace(0.0, 1e-3, 4) == 1.0
    assert marginal_laplace(3.0, 0.0, 4) == 1.0
    assert marginal_laplace(1.0, 1e-4, 4) == pytest.approx(math.exp(-1e-4 * math.pi ** 2 / 2),
                                                           rel=1e-15)
    with pytest.raises(ValueError):
        marginal_laplace(-1.0, 1e-4, 4)


def test_marginal_against_simulation():
    est = mc_joint_laplace(MID, 1.0, 0.0, 10 ** 6, seed=3)
    assert abs(est.mean - marginal_laplace(1.0, 1e-4, 4)) <= 3 * est.std_error


def test_cross_term_vanishes_on_axes():
    assert cross_term_f(0.0, 2.0, MID).value == 0.0
    assert cross_term_f(2.0, 0.0, MID).value == 0.0


def test_cross_term_against_cartesian_grid():
    f = cross_term_f(1.0, 1.0, MID).value
    coarse = cartesian_cross_term(1.0, 1.0, MID, 0.2)
    fine = cartesian_cross_term(1.0, 1.0, MID, 0.1)
    richardson = fine + (fine - coarse) / 3
    assert f > 0
    assert f == pytest.approx(richardson, rel=1e-4)


def test_joint_reduces_to_marginals():
    ev = LaplaceEvaluator(MID)
    assert joint_laplace(0.0, 0.0, ev) == 1.0
    assert joint_laplace(0.7, 0.0, ev) == pytest.approx(marginal_laplace(0.7, 1e-4, 4), rel=1e-14)
    assert joint_laplace(0.0, 0.7, ev) == pytest.approx(marginal_laplace(0.7, 1e-4, 4), rel=1e-14)
    assert LaplaceEvaluator(MID.replace(lam=0.0)).joint(5.0, 5.0) == 1.0


def test_joint_against_simulation():
    ev = LaplaceEvaluator(MID)
    v = ev.joint(0.5, 0.5)
    prod = marginal_laplace(0.5, 1e-4, 4) ** 2
    assert prod < v < 1
    est = mc_joint_laplace(MID, 0.5, 0.5, 10 ** 6, seed=5)
    assert abs(est.mean - v) <= 3 * est.std_error


def test_general_transform_consistency():
    rng = np.random.default_rng(1)
    ev = LaplaceEvaluator(MID.replace(lam=1e-3))
    for w1, w2 in 10 ** rng.uniform(-2, 3, size=(10, 2)):
        a = ev.joint(w1, w2)
        b = joint_laplace_general(w1, w2, MID.replace(lam=1e-3))
        assert abs(a - b) <= 2 * ev.spec.rel_tol * max(1.0, abs(math.log(a))) * a
    assert joint_laplace_general(3.0, 0.0, MID) == pytest.approx(
        marginal_laplace(3.0, 1e-4, 4), rel=1e-7)
    assert joint_laplace_general(3.0, 3.0, MID.replace(lam=0.0)) == 1.0


@pytest.mark.parametrize("w1, w2", [(0.3, 0.3), (2.0, 50.0), (400.0, 10.0)])
def test_derivative_matches_finite_difference(w1, w2):
    sc = MID.replace(lam=1e-3, relay=(5.0, 3.0))
    ev = LaplaceEvaluator(sc, QuadratureSpec(rel_tol=1e-10))
    h = 1e-5 * w1
    fd = (ev.joint(w1 + h, w2) - ev.joint(w1 - h, w2)) / (2 * h)
    assert d_joint_laplace_dw1(w1, w2, ev) == pytest.approx(fd, rel=1e-4)
    assert LaplaceEvaluator(sc.replace(lam=0.0)).d_joint_dw1(w1, w2) == 0.0


def test_monotone_and_positively_associated_on_grid():
    sc = MID.replace(lam=1e-3)
    ev = LaplaceEvaluator(sc)
    grid = np.logspace(-2, 4, 20)
    vals = np.array(ev.joint_many([(a, b) for a in grid for b in grid])).reshape(20, 20)
    assert np.all(np.diff(vals, axis=0) <= 1e-15)
    assert np.all(np.diff(vals, axis=1) <= 1e-15)
    marg = np.array([marginal_laplace(w, sc.lam, sc.alpha) for w in grid])
    assert np.all(vals >= np.outer(marg, marg) * (1 - 1e-12))


def test_flipped_sign_breaks_association():
    sc = MID.replace(lam=1e-3)
    ev = LaplaceEvaluator(sc, flip_cross_sign=True)
    prod = marginal_laplace(10.0, sc.lam, sc.alpha) ** 2
    assert ev.joint(10.0, 10.0) < prod


@given(st.floats(1e-3, 1e4), st.floats(1e-3, 1e4))
def test_joint_bounded_by_marginals(w1, w2):
    ev = _SHARED
    v = ev.joint(w1, w2)
    lo = marginal_laplace(w1, 1e-3, 4) * marginal_laplace(w2, 1e-3, 4)
    hi = min(marginal_laplace(w1, 1e-3, 4), marginal_laplace(w2, 1e-3, 4))
    assert lo * (1 - 1e-12) <= v <= hi * (1 + 1e-12)


_SHARED = LaplaceEvaluator(MID.replace(lam=1e-3))


def test_cache_matches_fresh_evaluation_and_is_shared():
    ev = LaplaceEvaluator(MID)
    first = ev.joint(1.2345678901234, 3.0)
    again = ev.joint(1.2345678901234, 3.0)
    assert first == again
    fresh = LaplaceEvaluator(MID).joint(1.2345678901234, 3.0)
    assert first == pytest.approx(fresh, rel=ev.spec.rel_tol)
    other = ev.for_scenario(MID.replace(lam=1e-3, rate=2.0))
    assert other._cache is ev._cache
    assert other.joint(1.2345678901234, 3.0) == pytest.approx(
        LaplaceEvaluator(MID.replace(lam=1e-3)).joint(1.2345678901234, 3.0), rel=1e-12)
    with pytest.raises(ValueError):
        ev.for_scenario(MID.replace(relay=(4.0, 0.0)))


def test_concurrent_use_gives_identical_values():
    pairs = [(a, b) for a in (0.1, 1.0, 10.0) for b in (0.5, 5.0)]
    ref = LaplaceEvaluator(MID).joint_many(pairs)
    ev = LaplaceEvaluator(MID)
    results = [None] * 8

    def work(i):
        results[i] = ev.joint_many(pairs[i % 3:] + pairs[:i % 3])

    threads = [threading.Thread(target=work, args=(i,)) for i in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for i, r in enumerate(results):
        assert r == ref[i % 3:] + ref[:i % 3]


def test_rejects_negative_arguments():
    ev = LaplaceEvaluator(MID)
    with pytest.raises(ValueError):
        ev.joint(-1.0, 1.0)
    with pytest.raises(ValueError):
        cross_term_f(1.0, -1.0, MID)
    with pytest.raises(ValueError):
        ev.d_joint_dw1(0.0, 1.0)


def test_infinite_argument_gives_zero():
    ev = LaplaceEvaluator(MID)
    assert ev.joint(math.inf, 1.0) == 0.0
    assert constant_C(4) > 0
