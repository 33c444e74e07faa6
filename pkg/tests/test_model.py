import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fdrelay.model import (
    LinkGains,
    NetworkScenario,
    Protocol,
    ProtocolParams,
    ccdf_Z,
    constant_C,
    delta,
    is_degenerate,
    mu_coefficients,
    path_loss,
    threshold_T,
)


@pytest.mark.parametrize("x, y, alpha, expected", [
    ((0, 0), (1, 0), 4, 1.0),
    ((0, 0), (2, 0), 4, 0.0625),
    ((0, 0), (10, 0), 3, 1e-3),
])
def test_path_loss_examples(x, y, alpha, expected):
    assert path_loss(x, y, alpha) == pytest.approx(expected, rel=1e-15)


def test_path_loss_vectorized_and_clamped():
    pts = np.array([[0.0, 0.0], [3.0, 4.0]])
    assert np.allclose(path_loss(pts, (0.0, 0.0), 2.5)[1], 5.0 ** -2.5)
    assert path_loss((0, 0), (0, 0), 4) == pytest.approx(1e-9 ** -4)


def test_constant_C_examples():
    assert constant_C(4) == pytest.approx(math.pi ** 2 / 2, rel=1e-14)
    assert constant_C(3) == pytest.approx(4 * math.pi ** 2 / (3 * math.sqrt(3)), rel=1e-14)


def test_constant_C_diverges_towards_two():
    assert constant_C(2 + 1e-6) > 1e6
    with pytest.raises(ValueError):
        constant_C(2.0)


def test_threshold_examples():
    assert threshold_T(0) == 0
    assert threshold_T(1) == 1
    assert threshold_T(0.5) == pytest.approx(0.41421356237309503, rel=1e-15)


def test_delta_against_arbitrary_precision():
    mpmath.mp.dps = 40
    a = mpmath.mpf(4)
    c = 2 * mpmath.pi * mpmath.gamma(2 / a) * mpmath.gamma(1 - 2 / a) / a
    ref = c * (mpmath.sqrt(2) - 1) ** mpmath.mpf("0.5")
    assert delta(0.5, 4) == pytest.approx(float(ref), rel=1e-14)
    assert delta(1, 4) == pytest.approx(constant_C(4), rel=1e-15)
    assert delta(1e-300, 4) < 1e-140


@given(st.floats(1e-3, 10), st.floats(1e-3, 10), st.floats(2.1, 6))
def test_delta_strictly_increasing_in_rate(r1, r2, alpha):
    lo, hi = sorted((r1, r2))
    if hi - lo < 1e-9:
        return
    assert 0 < delta(lo, alpha) < delta(hi, alpha)


def test_mu_examples():
    g = LinkGains(l_sd=1e-4, l_sr=1 / 16, l_rd=1 / 64)
    m = mu_coefficients(g, 0.0)
    assert (m.mu1, m.mu2, m.mu3) == pytest.approx((1e-4, 1 / 64, 1 / 16), rel=1e-14)
    m = mu_coefficients(g, 1.0)
    assert m.mu1 == pytest.approx(0, abs=1e-20)
    assert m.mu2 == pytest.approx(1e-4 + 1 / 64, rel=1e-14)
    assert m.mu3 == 0
    m = mu_coefficients(LinkGains(0.3, 1.0, 0.3), 0.0)
    assert m.mu1 == pytest.approx(0.3) and m.mu2 == pytest.approx(0.3) and m.degenerate


def test_mu_depends_on_modulus_only():
    g = LinkGains(0.01, 0.2, 0.05)
    a = mu_coefficients(g, 0.6)
    b = mu_coefficients(g, 0.6 * np.exp(1.3j))
    assert (a.mu1, a.mu2, a.mu3) == pytest.approx((b.mu1, b.mu2, b.mu3), rel=1e-14)


def test_mu_trace_and_determinant_over_many_triples():
    rng = np.random.default_rng(7)
    n = 10 ** 6
    l_sd = 10 ** rng.uniform(-6, 0, n)
    l_rd = 10 ** rng.uniform(-6, 0, n)
    rho = rng.uniform(0, 1, n)
    # vectorized copy of the eigenvalue formulas against the 2x2 matrix invariants
    s = l_sd + l_rd
    root = np.sqrt((l_sd - l_rd) ** 2 + 4 * l_sd * l_rd * rho ** 2)
    mu2 = 0.5 * (s + root)
    mu1 = l_sd * l_rd * (1 - rho) * (1 + rho) / mu2
    q = np.empty((n, 2, 2))
    q[:, 0, 0], q[:, 1, 1] = l_sd, l_rd
    q[:, 0, 1] = q[:, 1, 0] = rho * np.sqrt(l_sd * l_rd)
    tr = np.trace(q, axis1=1, axis2=2)
    # q00*q11 - q01^2 written without the cancellation near |rho| = 1
    det = q[:, 0, 0] * q[:, 1, 1] * (1 - rho) * (1 + rho)
    assert np.max(np.abs(mu1 + mu2 - tr) / tr) <= 1e-12
    assert np.max(np.abs(mu1 * mu2 - det) / det) <= 1e-12
    assert np.allclose(det, np.linalg.det(q), rtol=1e-6, atol=0)
    # the library function agrees with the vectorized copy on a subsample
    for i in range(0, n, 50_000):
        m = mu_coefficients(LinkGains(l_sd[i], 1.0, l_rd[i]), rho[i])
        assert m.mu1 == pytest.approx(mu1[i], rel=1e-12)
        assert m.mu2 == pytest.approx(mu2[i], rel=1e-12)


@given(st.floats(1e-6, 1), st.floats(1e-6, 1), st.floats(0, 1))
def test_mu_invariants(l_sd, l_rd, rho):
    m = mu_coefficients(LinkGains(l_sd, 0.5, l_rd), rho)
    assert 0 <= m.mu1 <= m.mu2 * (1 + 1e-15)
    assert m.mu1 + m.mu2 == pytest.approx(l_sd + l_rd, rel=1e-12)
    assert m.mu1 * m.mu2 == pytest.approx(l_sd * l_rd * (1 - rho ** 2), rel=1e-10, abs=1e-300)
    assert m.mu3 == pytest.approx(0.5 * (1 - rho ** 2))


def test_ccdf_examples():
    assert ccdf_Z(0.0, 1.0, 2.0) == 1.0
    assert ccdf_Z(1.0, 1.0, 1.0) == pytest.approx(2 * math.exp(-1), rel=1e-14)
    assert ccdf_Z(1.0, 1.0, 2.0) == pytest.approx(2 * math.exp(-0.5) - math.exp(-1), rel=1e-14)


def test_ccdf_continuous_across_branch_switch():
    mu2, u = 1.0, 1.7
    near = ccdf_Z(u, mu2 * (1 - 1e-7), mu2)
    # exact branch at gaps 1e-5 and 2e-5, extrapolated linearly to gap 1e-7
    g1, g2 = 1e-5, 2e-5
    v1 = ccdf_Z(u, mu2 * (1 - g1), mu2)
    v2 = ccdf_Z(u, mu2 * (1 - g2), mu2)
    extrap = v1 + (1e-7 - g1) * (v2 - v1) / (g2 - g1)
    assert is_degenerate(mu2 * (1 - 1e-7), mu2) and not is_degenerate(mu2 * (1 - g1), mu2)
    assert near == pytest.approx(extrap, rel=1e-6)


@pytest.mark.parametrize("u", [0.1, 1.0, 5.0])
def test_ccdf_matches_sampled_tail(u):
    mu1, mu2, n = 0.7, 1.9, 10 ** 6
    rng = np.random.default_rng(11)
    z = mu1 * rng.exponential(size=n) + mu2 * rng.exponential(size=n)
    p_hat = np.mean(z >= u)
    p = ccdf_Z(u, mu1, mu2)
    assert abs(p_hat - p) <= 3 * math.sqrt(p * (1 - p) / n)


def test_ccdf_rejects_bad_arguments():
    with pytest.raises(ValueError):
        ccdf_Z(-1.0, 1.0, 2.0)
    with pytest.raises(ValueError):
        ccdf_Z(1.0, 2.0, 1.0)


@pytest.mark.parametrize("kwargs", [
    dict(D=0, relay=(1, 0)),
    dict(D=10, relay=(1, 0), alpha=2.0),
    dict(D=10, relay=(1, 0), lam=-1e-4),
    dict(D=10, relay=(1, 0), rate=0.0),
    dict(D=10, relay=(0, 0)),
    dict(D=10, relay=(10, 0)),
])
def test_scenario_validation(kwargs):
    with pytest.raises(ValueError):
        NetworkScenario(**kwargs)


def test_scenario_gains_and_replace():
    sc = NetworkScenario(D=10, relay=(5, 0))
    g = sc.gains()
    assert (g.l_sd, g.l_sr, g.l_rd) == pytest.approx((1e-4, 5.0 ** -4, 5.0 ** -4))
    assert sc.replace(lam=1e-3).lam == 1e-3 and sc.replace(lam=1e-3).relay == sc.relay


@pytest.mark.parametrize("kwargs", [dict(rho=1.1), dict(epsilon=1.0), dict(epsilon=-0.1),
                                    dict(nc=0.0), dict(n_slabs=0)])
def test_params_validation(kwargs):
    with pytest.raises(ValueError):
        ProtocolParams(Protocol.DF, **kwargs)


def test_params_keep_only_modulus():
    p = ProtocolParams(Protocol.DF, rho=0.3 + 0.4j)
    assert p.abs_rho == pytest.approx(0.5)
    with pytest.raises(ValueError):
        LinkGains(0.0, 1.0, 1.0)
