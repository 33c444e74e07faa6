"""Geometry, path loss and the scalar coefficients shared by the analytic and
Monte Carlo code paths.

The source sits at the origin and the destination at ``(D, 0)``. Every node
transmits with unit power and all fading is Rayleigh, so received powers are
``|h|^2 * l(x, y)`` with ``|h|^2`` a unit-mean exponential.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

#: Distances below this are clamped before applying the simplified path loss.
MIN_DISTANCE = 1e-9

#: Relative eigenvalue gap below which the equal-eigenvalue (Gamma) form is used.
DEGENERATE_GAP = 1e-6


class Protocol(str, Enum):
    DT = "DT"
    DF = "DF"
    SDF = "SDF"
    CF = "CF"


@dataclass(frozen=True)
class NetworkScenario:
    """Reference link geometry and network parameters.

    Args:
        D: source-destination distance.
        relay: relay position as an ``(x, y)`` pair.
        alpha: path-loss exponent, must exceed 2.
        lam: density of interferers per unit area.
        rate: attempted rate in bits per channel use.
    """

    D: float
    relay: tuple[float, float]
    alpha: float = 4.0
    lam: float = 1e-4
    rate: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "relay", (float(self.relay[0]), float(self.relay[1])))
        if not self.D > 0:
            raise ValueError(f"D must be positive, got {self.D}")
        if not self.alpha > 2:
            raise ValueError(f"alpha must exceed 2, got {self.alpha}")
        if not self.lam >= 0:
            raise ValueError(f"lambda must be non-negative, got {self.lam}")
        if not self.rate > 0:
            raise ValueError(f"rate must be positive, got {self.rate}")
        if math.hypot(*self.relay) < MIN_DISTANCE:
            raise ValueError("relay coincides with the source")
        if math.hypot(self.relay[0] - self.D, self.relay[1]) < MIN_DISTANCE:
            raise ValueError("relay coincides with the destination")

    @property
    def source(self) -> tuple[float, float]:
        return (0.0, 0.0)

    @property
    def destination(self) -> tuple[float, float]:
        return (float(self.D), 0.0)

    @property
    def dist_sr(self) -> float:
        return math.hypot(*self.relay)

    @property
    def dist_rd(self) -> float:
        return math.hypot(self.relay[0] - self.D, self.relay[1])

    def gains(self) -> "LinkGains":
        a = self.alpha
        return LinkGains(
            l_sd=path_loss(self.source, self.destination, a),
            l_sr=path_loss(self.source, self.relay, a),
            l_rd=path_loss(self.relay, self.destination, a),
        )

    def replace(self, **changes) -> "NetworkScenario":
        fields = dict(D=self.D, relay=self.relay, alpha=self.alpha, lam=self.lam, rate=self.rate)
        fields.update(changes)
        return NetworkScenario(**fields)


@dataclass(frozen=True)
class LinkGains:
    l_sd: float
    l_sr: float
    l_rd: float

    def __post_init__(self):
        for name in ("l_sd", "l_sr", "l_rd"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v}")


@dataclass(frozen=True)
class MuCoefficients:
    """Eigenvalues ``mu1 <= mu2`` of the combined source+relay gain and the
    effective source-relay gain ``mu3``."""

    mu1: float
    mu2: float
    mu3: float

    @property
    def degenerate(self) -> bool:
        return is_degenerate(self.mu1, self.mu2)


@dataclass(frozen=True)
class ProtocolParams:
    """Protocol selector and its design parameters.

    ``rho`` may be complex; only its modulus enters the outage probability.
    """

    protocol: Protocol = Protocol.DF
    rho: complex = 0.0
    epsilon: float = 0.5
    nc: float = 1.0
    n_slabs: int = 64
    _abs_rho: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "protocol", Protocol(self.protocol))
        r = abs(complex(self.rho))
        if r > 1 + 1e-12:
            raise ValueError(f"|rho| must not exceed 1, got {r}")
        object.__setattr__(self, "_abs_rho", min(r, 1.0))
        if not 0 <= self.epsilon < 1:
            raise ValueError(f"epsilon must lie in [0, 1), got {self.epsilon}")
        if not self.nc > 0:
            raise ValueError(f"nc must be positive, got {self.nc}")
        if int(self.n_slabs) < 1:
            raise ValueError(f"n_slabs must be >= 1, got {self.n_slabs}")

    @property
    def abs_rho(self) -> float:
        return self._abs_rho


def path_loss(x, y, alpha: float):
    """Simplified path loss ``||x - y||^-alpha``.

    Works elementwise when ``x`` or ``y`` are arrays of points with trailing
    dimension 2. Distances are clamped at :data:`MIN_DISTANCE`.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dist = np.hypot(x[..., 0] - y[..., 0], x[..., 1] - y[..., 1])
    out = np.maximum(dist, MIN_DISTANCE) ** (-alpha)
    return float(out) if out.ndim == 0 else out


def constant_C(alpha: float) -> float:
    """``2*pi*Gamma(2/alpha)*Gamma(1 - 2/alpha)/alpha``, equal to ``pi^2/2`` at alpha=4."""
    if not alpha > 2:
        raise ValueError(f"constant_C needs alpha > 2, got {alpha}")
    return 2 * math.pi * math.gamma(2 / alpha) * math.gamma(1 - 2 / alpha) / alpha


def threshold_T(rate: float) -> float:
    if rate < 0:
        raise ValueError(f"rate must be non-negative, got {rate}")
    return math.expm1(rate * math.log(2))


def delta(rate: float, alpha: float) -> float:
    return constant_C(alpha) * threshold_T(rate) ** (2 / alpha)


def mu_coefficients(gains: LinkGains, rho: complex = 0.0) -> MuCoefficients:
    r = min(abs(complex(rho)), 1.0)
    # factored 1 - |rho|^2 stays accurate near |rho| = 1
    q = (1 - r) * (1 + r)
    s = gains.l_sd + gains.l_rd
    root = math.sqrt((gains.l_sd - gains.l_rd) ** 2 + 4 * gains.l_sd * gains.l_rd * r * r)
    mu2 = 0.5 * (s + root)
    # product form avoids cancellation in s - root
    mu1 = gains.l_sd * gains.l_rd * q / mu2
    return MuCoefficients(mu1=mu1, mu2=mu2, mu3=gains.l_sr * q)


def is_degenerate(mu1: float, mu2: float) -> bool:
    return (mu2 - mu1) < DEGENERATE_GAP * mu2


def ccdf_Z(u, mu1: float, mu2: float):
    """Tail ``P(mu1*W1 + mu2*W2 >= u)`` for independent unit-mean exponentials."""
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise ValueError("ccdf_Z is defined for u >= 0")
    if not 0 < mu1 <= mu2:
        raise ValueError(f"need 0 < mu1 <= mu2, got {mu1}, {mu2}")
    if is_degenerate(mu1, mu2):
        out = (1 + u / mu1) * np.exp(-u / mu1)
    else:
        out = (mu2 * np.exp(-u / mu2) - mu1 * np.exp(-u / mu1)) / (mu2 - mu1)
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out
