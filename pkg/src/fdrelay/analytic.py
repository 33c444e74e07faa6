"""Closed-form and semi-closed-form outage probabilities.

Success probabilities are assembled from the joint Laplace transform. To keep
precision when the outage probability is tiny (small interferer density),
outage values are formed from ``expm1`` of the transform exponents rather
than from ``1 - L``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .laplace import LaplaceEvaluator, marginal_laplace
from .model import (
    DEGENERATE_GAP,
    NetworkScenario,
    constant_C,
    delta,
    is_degenerate,
    mu_coefficients,
    threshold_T,
)
from .quadrature import QuadratureSpec, ToleranceNotReached, expect_exponential

#: Relative perturbation applied to ||r - d|| when it equals D in the bounds.
EQUIDISTANT_PERTURBATION = 1e-6

#: Residue outside [0, 1] above which clamping emits a warning.
CLAMP_WARN = 1e-8

#: Quadrature tolerance used for fading expectations in the CF bound.
CF_EXPECTATION_RTOL = 1e-5


class Kind(str, Enum):
    EXACT = "exact"
    UPPER = "upper_bound"
    LOWER = "lower_bound"


class NumericConsistencyWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class OutageValue:
    value: float
    kind: Kind
    quadrature_error: float = 0.0

    def __float__(self) -> float:
        return self.value


def _clamp(p: float, what: str) -> float:
    if p < -CLAMP_WARN or p > 1 + CLAMP_WARN:
        warnings.warn(f"{what}: value {p:.3g} outside [0, 1] before clamping",
                      NumericConsistencyWarning, stacklevel=3)
    return min(1.0, max(0.0, p))


def _evaluator(scenario, evaluator):
    if evaluator is None:
        return LaplaceEvaluator(scenario)
    if evaluator.scenario != scenario:
        raise ValueError("evaluator was built for a different scenario")
    return evaluator


class _Terms:
    """Exponents and absolute errors of a batch of joint transforms."""

    def __init__(self, ev: LaplaceEvaluator, pairs):
        self.pairs = [(float(a), float(b)) for a, b in pairs]
        finite = [p for p in self.pairs if math.isfinite(p[0]) and math.isfinite(p[1])]
        fs = dict(zip(finite, ev.cross_terms(finite)))
        self.exps = []
        self.errs = []
        for p in self.pairs:
            if p not in fs:
                self.exps.append(-math.inf)
                self.errs.append(0.0)
                continue
            f = fs[p]
            if not f.converged:
                raise ToleranceNotReached(f, f"cross term at {p}")
            e = min(0.0, ev.exponent(p[0], p[1], f))
            self.exps.append(e)
            self.errs.append(math.exp(e) * ev.lam * f.error)

    def L(self, i):
        return math.exp(self.exps[i])

    def om1(self, i):
        """``L - 1`` without cancellation."""
        return math.expm1(self.exps[i])


def dt_outage(scenario: NetworkScenario) -> OutageValue:
    x = scenario.lam * delta(scenario.rate, scenario.alpha) * scenario.D ** 2
    return OutageValue(-math.expm1(-x), Kind.EXACT)


def _success_pair(ev, mu1, mu2, w2, T):
    """``E[exp(-w2*I_r) * P(mu1*W1 + mu2*W2 >= T*I_d | I_d)]`` minus one, with error.

    Returns ``(success - 1, abs_error)``.
    """
    if is_degenerate(mu1, mu2):
        w1 = T / mu1
        t = _Terms(ev, [(w1, w2)])
        dL = ev.d_joint_dw1(w1, w2) if ev.lam > 0 else 0.0
        return t.om1(0) - w1 * dL, t.errs[0] * 2
    t = _Terms(ev, [(T / mu2, w2), (T / mu1, w2)])
    val = (mu2 * t.om1(0) - mu1 * t.om1(1)) / (mu2 - mu1)
    err = (mu2 * t.errs[0] + mu1 * t.errs[1]) / (mu2 - mu1)
    return val, err


def df_joint_success(scenario: NetworkScenario, rho: complex = 0.0,
                     evaluator: LaplaceEvaluator | None = None) -> float:
    """P(relay decodes and the cooperative link supports the rate)."""
    ev = _evaluator(scenario, evaluator)
    mu = mu_coefficients(scenario.gains(), rho)
    if mu.mu3 == 0:
        return 0.0
    if scenario.lam == 0:
        return 1.0
    T = threshold_T(scenario.rate)
    v, _ = _success_pair(ev, mu.mu1, mu.mu2, T / mu.mu3, T)
    return _clamp(1 + v, "df_joint_success")


def _relay_fails_dt_success_om(ev, l_sd, w2, T):
    """``L_Id(T/l_sd) - L(T/l_sd, w2)`` as a difference of expm1 terms."""
    t = _Terms(ev, [(T / l_sd, 0.0), (T / l_sd, w2)])
    return t.om1(0) - t.om1(1), t.errs[1]


def df_relay_fails_dt_success(scenario: NetworkScenario, rho: complex = 0.0,
                              evaluator: LaplaceEvaluator | None = None) -> float:
    """P(relay fails to decode while the direct link alone succeeds)."""
    ev = _evaluator(scenario, evaluator)
    g = scenario.gains()
    mu = mu_coefficients(g, rho)
    T = threshold_T(scenario.rate)
    if scenario.lam == 0:
        return 0.0
    w2 = math.inf if mu.mu3 == 0 else T / mu.mu3
    v, _ = _relay_fails_dt_success_om(ev, g.l_sd, w2, T)
    return _clamp(v, "df_relay_fails_dt_success")


def df_outage_exact(scenario: NetworkScenario, rho: complex = 0.0,
                    evaluator: LaplaceEvaluator | None = None) -> OutageValue:
    ev = _evaluator(scenario, evaluator)
    if scenario.lam == 0:
        return OutageValue(0.0, Kind.EXACT)
    g = scenario.gains()
    mu = mu_coefficients(g, rho)
    T = threshold_T(scenario.rate)
    if mu.mu3 == 0:
        # relay never decodes: plain direct transmission
        p2, e2 = _relay_fails_dt_success_om(ev, g.l_sd, math.inf, T)
        return OutageValue(_clamp(1 - p2, "df_outage_exact"), Kind.EXACT, e2)
    w2 = T / mu.mu3
    s1, e1 = _success_pair(ev, mu.mu1, mu.mu2, w2, T)
    p2, e2 = _relay_fails_dt_success_om(ev, g.l_sd, w2, T)
    return OutageValue(_clamp(-s1 - p2, "df_outage_exact"), Kind.EXACT, e1 + e2)


def _equidistant_rd(scenario: NetworkScenario) -> float:
    rd = scenario.dist_rd
    if abs(rd - scenario.D) <= EQUIDISTANT_PERTURBATION * scenario.D:
        rd = scenario.D * (1 + EQUIDISTANT_PERTURBATION) if rd >= scenario.D \
            else scenario.D * (1 - EQUIDISTANT_PERTURBATION)
    return rd


def df_outage_upper(scenario: NetworkScenario, evaluator=None) -> OutageValue:
    """Closed-form upper bound on the DF outage for uncorrelated symbols."""
    lam, a, D = scenario.lam, scenario.alpha, scenario.D
    d = delta(scenario.rate, a)
    rd = _equidistant_rd(scenario)
    r = scenario.dist_sr
    p_dt = -math.expm1(-lam * d * D ** 2)
    p_relay = -math.expm1(-lam * d * r ** 2)
    Da, ra = D ** a, rd ** a
    p_coop = (-Da * math.expm1(-lam * d * rd ** 2) + ra * math.expm1(-lam * d * D ** 2)) / (Da - ra)
    return OutageValue(_clamp(min(p_dt, p_relay + p_coop), "df_outage_upper"), Kind.UPPER)


def df_spatial_contention(scenario: NetworkScenario) -> float:
    """Small-density slope bound ``lim P_out/lambda`` for DF with uncorrelated symbols."""
    a, D = scenario.alpha, scenario.D
    rd = _equidistant_rd(scenario)
    r = scenario.dist_sr
    coop = rd ** 2 * D ** 2 * (D ** (a - 2) - rd ** (a - 2)) / (D ** a - rd ** a)
    return delta(scenario.rate, a) * min(D ** 2, r ** 2 + coop)


def sdf_outage_lower(scenario: NetworkScenario, epsilon: float,
                     evaluator: LaplaceEvaluator | None = None) -> OutageValue:
    """Lower bound on the sequential half-duplex DF outage.

    Outage contains the complement of two disjoint success events: the relay
    decodes in the listening phase and the (concavity-bounded) two-phase
    rate is supported, or the relay fails and the direct link succeeds.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    ev = _evaluator(scenario, evaluator)
    if scenario.lam == 0:
        return OutageValue(0.0, Kind.LOWER)
    g = scenario.gains()
    T = threshold_T(scenario.rate)
    T_listen = threshold_T(scenario.rate / epsilon)
    w2 = T_listen / g.l_sr
    m1, m2 = sorted((g.l_sd, (1 - epsilon) * g.l_rd))
    s1, e1 = _success_pair(ev, m1, m2, w2, T)
    p2, e2 = _relay_fails_dt_success_om(ev, g.l_sd, w2, T)
    return OutageValue(_clamp(-s1 - p2, "sdf_outage_lower"), Kind.LOWER, e1 + e2)


def cf_slab_bound(T: float, nc: float, l_sr: float, l_sd: float, n_slabs: int, joint, marginal_r):
    """Upper bound on ``P(R2(0) < log2(1+T))`` by an ``n_slabs`` staircase.

    ``joint(pairs)`` returns joint transforms for a list of ``(w1, w2)`` pairs
    and ``marginal_r(w)`` the relay-side marginal transform; taking them as
    conditional transforms ``exp(-w1*I_d - w2*I_r)`` gives the bound for a
    fixed interference state.
    """
    N = int(n_slabs)
    k = nc * T / (N * l_sr)
    first = 1 - math.exp(-T * nc / l_sr) * marginal_r(T / l_sr)
    pairs = []
    for n in range(N):
        w1 = (N - n) * T / (N * l_sd)
        pairs.append((w1, n * T / (N * l_sr)))
        pairs.append((w1, (n + 1) * T / (N * l_sr)))
    L = joint(pairs)
    slabs = sum(math.exp(-n * k) * L[2 * n] - math.exp(-(n + 1) * k) * L[2 * n + 1]
                for n in range(N))
    return first - slabs


def cf_outage_upper(scenario: NetworkScenario, nc: float, n_slabs: int = 64,
                    evaluator: LaplaceEvaluator | None = None,
                    spec: QuadratureSpec | None = None) -> OutageValue:
    """Upper bound on the CF outage, valid for any interference correlation.

    Uses the one-bit rate gap: the correlated-noise outage at rate ``R`` is
    dominated by the uncorrelated-noise outage at ``R + 1``.
    """
    if not nc > 0:
        raise ValueError("nc must be positive")
    if int(n_slabs) < 1:
        raise ValueError("n_slabs must be >= 1")
    ev = _evaluator(scenario, evaluator)
    if scenario.lam == 0:
        return OutageValue(0.0, Kind.UPPER)
    spec = (spec or ev.spec).loosened(CF_EXPECTATION_RTOL)
    g = scenario.gains()
    lam, a = scenario.lam, scenario.alpha
    T = threshold_T(scenario.rate + 1)

    errs = []

    def joint(pairs):
        t = _Terms(ev, pairs)
        errs.extend(t.errs)
        return [t.L(i) for i in range(len(pairs))]

    p_a = cf_slab_bound(T, nc, g.l_sr, g.l_sd, n_slabs, joint,
                        lambda w: marginal_laplace(w, lam, a))

    cst = constant_C(a)
    scale = (1 + T) / (T * nc * g.l_rd)
    c_d = lam * cst * (scale * g.l_sr) ** (2 / a)
    c_r = lam * cst * (scale * g.l_sd) ** (2 / a)
    ed = expect_exponential(lambda h: np.exp(-c_d * h ** (2 / a)), spec)
    er = expect_exponential(lambda h: np.exp(-c_r * h ** (2 / a)), spec)
    p_ab = 1 - ed.value * er.value
    err = sum(errs) + ed.error + er.error
    return OutageValue(_clamp(p_a + p_ab, "cf_outage_upper"), Kind.UPPER, err)


def cf_rate_gap_check(rate_correlated, rate_uncorrelated, tol: float = 1e-9):
    """True where ``R_CF(rho_N) >= R_CF(0) - 1`` (elementwise for arrays)."""
    ok = np.asarray(rate_correlated) >= np.asarray(rate_uncorrelated) - 1 - tol
    return bool(ok) if ok.ndim == 0 else ok
