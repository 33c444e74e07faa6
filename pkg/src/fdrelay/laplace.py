"""Laplace transforms of the interference powers at the destination and relay.

For the simplified path loss the joint transform factorizes as

    L(w1, w2) = exp(-lam * (C*(w1**(2/a) + w2**(2/a)) - f(w1, w2)))

where ``f`` is the cross term integrated numerically over the plane. ``f`` is
non-negative and enters with a minus sign, so the joint transform always
dominates the product of the marginals (interference at the two receivers is
positively associated). The Monte Carlo estimator in :mod:`fdrelay.simulator`
arbitrates this convention.

Arguments ``w1`` act on the destination interference ``I_d`` and ``w2`` on the
relay interference ``I_r``. Only real non-negative arguments are supported.
"""

from __future__ import annotations

import math
import threading
from typing import Callable, Iterable

import numpy as np

from .model import MIN_DISTANCE, NetworkScenario, constant_C
from .quadrature import QuadratureSpec, QuadResult, ToleranceNotReached, integrate_plane_batch


def marginal_laplace(omega: float, lam: float, alpha: float) -> float:
    """``E[exp(-omega*I)]`` for the interference at any single location."""
    if omega < 0:
        raise ValueError("omega must be non-negative")
    if omega == 0 or lam == 0:
        return 1.0
    if math.isinf(omega):
        return 0.0
    return math.exp(-lam * constant_C(alpha) * omega ** (2 / alpha))


def _key(w: float) -> float:
    return float(f"{w:.12g}")


def _scale(scenario: NetworkScenario, *omegas: float) -> float:
    s = 0.5 * scenario.dist_rd
    return max(1.0, s, *(w ** (1 / scenario.alpha) for w in omegas if w > 0))


def _cross_terms(scenario: NetworkScenario, pairs, spec: QuadratureSpec, derivative=False):
    """Batch evaluation of the cross term (or its w1-derivative) for many pairs."""
    pairs = np.asarray(pairs, dtype=float).reshape(-1, 2)
    w1, w2 = pairs[:, 0], pairs[:, 1]
    a = scenario.alpha
    dx, dy = scenario.destination
    rx, ry = scenario.relay

    def field(x, y, k):
        pd = np.maximum(np.hypot(x - dx, y - dy), MIN_DISTANCE) ** a
        pr = np.maximum(np.hypot(x - rx, y - ry), MIN_DISTANCE) ** a
        o1, o2 = w1[k], w2[k]
        if derivative:
            return o2 * pd / ((o1 + pd) ** 2 * (o2 + pr))
        return o1 * o2 / ((o1 + pd) * (o2 + pr))

    scale = [_scale(scenario, min(p)) for p in pairs]
    return integrate_plane_batch(field, len(pairs), [scenario.destination, scenario.relay],
                                 spec, scale=np.array(scale))


def cross_term_f(omega1: float, omega2: float, scenario: NetworkScenario,
                 spec: QuadratureSpec = QuadratureSpec()) -> QuadResult:
    """Cross term ``f(w1, w2)``: zero when either argument vanishes."""
    if omega1 < 0 or omega2 < 0:
        raise ValueError("omega arguments must be non-negative")
    if omega1 == 0 or omega2 == 0:
        return QuadResult(0.0, 0.0, True)
    v, e, ok = _cross_terms(scenario, [(omega1, omega2)], spec)
    return QuadResult(float(v[0]), float(e[0]), bool(ok[0]))


class LaplaceEvaluator:
    """Joint transform for one scenario with a memo table on ``(w1, w2)``.

    Cached cross terms are keyed on arguments rounded to 12 significant
    digits. ``flip_cross_sign`` exists only as a negative control for the
    Monte Carlo sign check.
    """

    def __init__(self, scenario: NetworkScenario, spec: QuadratureSpec = QuadratureSpec(),
                 flip_cross_sign: bool = False):
        self.scenario = scenario
        self.spec = spec
        self.flip_cross_sign = flip_cross_sign
        self.C = constant_C(scenario.alpha)
        self._cache: dict[tuple[float, float], QuadResult] = {}
        self._lock = threading.Lock()

    @property
    def lam(self) -> float:
        return self.scenario.lam

    def for_scenario(self, scenario: NetworkScenario) -> "LaplaceEvaluator":
        """Evaluator for ``scenario`` sharing this memo table.

        The cross term depends only on the geometry and path-loss exponent,
        so scenarios differing in density or rate can share it.
        """
        s = self.scenario
        if (scenario.D, scenario.relay, scenario.alpha) != (s.D, s.relay, s.alpha):
            raise ValueError("cross terms can only be shared within one geometry")
        ev = LaplaceEvaluator(scenario, self.spec, self.flip_cross_sign)
        ev._cache = self._cache
        ev._lock = self._lock
        return ev

    def cross_terms(self, pairs: Iterable[tuple[float, float]]) -> list[QuadResult]:
        pairs = [(float(a), float(b)) for a, b in pairs]
        keys = [(_key(a), _key(b)) for a, b in pairs]
        with self._lock:
            missing = sorted({k for k in keys if k not in self._cache and k[0] > 0 and k[1] > 0
                              and math.isfinite(k[0]) and math.isfinite(k[1])})
        if missing:
            v, e, ok = _cross_terms(self.scenario, missing, self.spec)
            fresh = {k: QuadResult(float(vi), float(ei), bool(oi))
                     for k, vi, ei, oi in zip(missing, v, e, ok)}
            with self._lock:
                self._cache.update(fresh)
        out = []
        for k in keys:
            if k[0] == 0 or k[1] == 0:
                out.append(QuadResult(0.0, 0.0, True))
            else:
                out.append(self._cache[k])
        return out

    def exponent(self, omega1: float, omega2: float, f: QuadResult) -> float:
        a = self.scenario.alpha
        sign = 1.0 if self.flip_cross_sign else -1.0
        return -self.lam * (self.C * (omega1 ** (2 / a) + omega2 ** (2 / a)) + sign * f.value)

    def joint_many(self, pairs) -> list[float]:
        pairs = [(float(a), float(b)) for a, b in pairs]
        for a, b in pairs:
            if a < 0 or b < 0:
                raise ValueError("omega arguments must be non-negative")
        if self.lam == 0:
            return [1.0] * len(pairs)
        finite = [(a, b) for a, b in pairs if math.isfinite(a) and math.isfinite(b)]
        fs = dict(zip(finite, self.cross_terms(finite)))
        out = []
        for p in pairs:
            if p not in fs:
                out.append(0.0)
                continue
            f = fs[p]
            if not f.converged:
                raise ToleranceNotReached(f, f"cross term at {p}")
            out.append(min(1.0, math.exp(self.exponent(p[0], p[1], f))))
        return out

    def joint(self, omega1: float, omega2: float) -> float:
        return self.joint_many([(omega1, omega2)])[0]

    def quadrature_error(self, omega1: float, omega2: float) -> float:
        """Propagated absolute error of :meth:`joint` from the cross term."""
        if self.lam == 0 or omega1 == 0 or omega2 == 0:
            return 0.0
        f = self.cross_terms([(omega1, omega2)])[0]
        return self.joint(omega1, omega2) * self.lam * f.error

    def d_joint_dw1(self, omega1: float, omega2: float) -> float:
        if not omega1 > 0:
            raise ValueError("derivative needs omega1 > 0")
        if omega2 < 0:
            raise ValueError("omega2 must be non-negative")
        if self.lam == 0:
            return 0.0
        a = self.scenario.alpha
        sign = 1.0 if self.flip_cross_sign else -1.0
        if omega2 == 0:
            dfd1 = 0.0
        else:
            v, e, ok = _cross_terms(self.scenario, [(omega1, omega2)], self.spec, derivative=True)
            if not ok[0]:
                raise ToleranceNotReached(QuadResult(float(v[0]), float(e[0]), False),
                                          "cross-term derivative")
            dfd1 = float(v[0])
        L = self.joint(omega1, omega2)
        return -self.lam * L * (self.C * (2 / a) * omega1 ** (2 / a - 1) + sign * dfd1)


def joint_laplace(omega1: float, omega2: float, evaluator: LaplaceEvaluator) -> float:
    return evaluator.joint(omega1, omega2)


def d_joint_laplace_dw1(omega1: float, omega2: float, evaluator: LaplaceEvaluator) -> float:
    """Partial derivative of the joint transform in its destination argument (<= 0)."""
    return evaluator.d_joint_dw1(omega1, omega2)


def simplified_path_loss(alpha: float) -> Callable[[np.ndarray], np.ndarray]:
    return lambda dist: np.maximum(dist, MIN_DISTANCE) ** (-alpha)


def joint_laplace_general(omega1: float, omega2: float, scenario: NetworkScenario,
                          pathloss: Callable[[np.ndarray], np.ndarray] | None = None,
                          spec: QuadratureSpec = QuadratureSpec()) -> float:
    """Joint transform from a single planar quadrature of the full exponent.

    ``pathloss`` maps distances to gains and defaults to the simplified law;
    any spherically symmetric law decaying faster than ``dist**-2`` works.
    """
    if omega1 < 0 or omega2 < 0:
        raise ValueError("omega arguments must be non-negative")
    if scenario.lam == 0 or (omega1 == 0 and omega2 == 0):
        return 1.0
    if pathloss is None:
        pathloss = simplified_path_loss(scenario.alpha)
    dx, dy = scenario.destination
    rx, ry = scenario.relay

    def field(x, y, k):
        gd = omega1 * pathloss(np.hypot(x - dx, y - dy))
        gr = omega2 * pathloss(np.hypot(x - rx, y - ry))
        # 1 - 1/((1+gd)(1+gr)) written without cancellation
        return (gd + gr + gd * gr) / ((1 + gd) * (1 + gr))

    scale = _scale(scenario, max(omega1, omega2))
    v, e, ok = integrate_plane_batch(field, 1, [scenario.destination, scenario.relay], spec,
                                     scale=scale)
    if not ok[0]:
        raise ToleranceNotReached(QuadResult(float(v[0]), float(e[0]), False), "joint exponent")
    return math.exp(-scenario.lam * float(v[0]))
