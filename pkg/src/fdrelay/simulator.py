"""Monte Carlo oracle for the interference-limited relay channel.

Interferers form a homogeneous Poisson process inside a disc centred on the
midpoint of the source-destination segment. Each point carries independent
Rayleigh marks towards the relay and the destination. The mean interference
from beyond the disc is added back deterministically (its fluctuation is a
second-order effect once the window is wide enough for ``omega * l`` to be
small at the edge; see :func:`choose_window`).

Replications are grouped in chunks of :data:`CHUNK` fields. Chunk ``c`` draws
from ``Philox`` keyed by ``SeedSequence(seed, spawn_key=(c,))``, a
counter-based stream, and chunk results are reduced in index order. Results
are therefore identical for any number of workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model import (
    MIN_DISTANCE,
    NetworkScenario,
    Protocol,
    ProtocolParams,
    constant_C,
    mu_coefficients,
    threshold_T,
)

CHUNK = 4096
DEFAULT_TRUNCATION = 1e-3

#: Marginal transform value below which a transform argument stops growing the window.
NEGLIGIBLE_TRANSFORM = 1e-15


def chunk_stream(seed: int, chunk: int) -> np.random.Generator:
    """Independent generator for one chunk, derived from ``(seed, chunk)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(chunk),))
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class FieldRealization:
    """A batch of ``n`` independent draws of the marked field and link fadings.

    Points of all draws are stored back to back; ``owner[i]`` is the draw
    that point ``i`` belongs to.
    """

    points: np.ndarray
    owner: np.ndarray
    marks_r: np.ndarray
    marks_d: np.ndarray
    h_sr: np.ndarray
    h_sd: np.ndarray
    h_rd: np.ndarray
    window_radius: float
    center: tuple[float, float]

    @property
    def n(self) -> int:
        return self.h_sr.size

    def counts(self) -> np.ndarray:
        return np.bincount(self.owner, minlength=self.n)


@dataclass
class InterferenceState:
    I_r: np.ndarray
    I_d: np.ndarray
    rho_N: np.ndarray
    interference_free: np.ndarray


@dataclass(frozen=True)
class OutageEstimate:
    p_hat: float
    half_width: float
    n_samples: int
    seed: int

    @classmethod
    def from_count(cls, hits: int, n: int, seed: int) -> "OutageEstimate":
        p = hits / n
        return cls(p, 1.96 * math.sqrt(p * (1 - p) / n), n, seed)

    @property
    def sigma(self) -> float:
        return self.half_width / 1.96


@dataclass(frozen=True)
class MeanEstimate:
    mean: float
    std_error: float
    n_samples: int
    seed: int

    @property
    def half_width(self) -> float:
        return 1.96 * self.std_error


def _cn(rng, size):
    """Unit-power circular complex Gaussian."""
    z = rng.standard_normal((2, size))
    return (z[0] + 1j * z[1]) * math.sqrt(0.5)


def window_center(scenario: NetworkScenario) -> tuple[float, float]:
    return (0.5 * scenario.D, 0.0)


def _receiver_offset(scenario: NetworkScenario) -> float:
    cx, cy = window_center(scenario)
    rx, ry = scenario.relay
    return max(0.5 * scenario.D, math.hypot(rx - cx, ry - cy))


def worst_omega(scenario: NetworkScenario, params: ProtocolParams | None = None) -> float:
    """Largest transform argument the outage events of ``params`` involve."""
    g = scenario.gains()
    T = threshold_T(scenario.rate)
    gains = [g.l_sd, g.l_sr]
    if params is not None and params.protocol == Protocol.SDF and params.epsilon > 0:
        T = max(T, threshold_T(scenario.rate / params.epsilon))
    if params is not None and params.protocol == Protocol.DF:
        mu3 = mu_coefficients(g, params.rho).mu3
        if mu3 > 0:
            gains.append(mu3)
    if params is not None and params.protocol == Protocol.CF:
        T = threshold_T(scenario.rate + 1)
    return T / min(gains)


def choose_window(scenario: NetworkScenario, rel_truncation_error: float = DEFAULT_TRUNCATION,
                  omega_max: float | None = None) -> float:
    """Radius of the simulation disc around the source-destination midpoint.

    Two conditions are enforced, measured from the worse-placed receiver at
    offset ``s`` from the centre (so the nearest truncated interferer is at
    least ``a - s`` away):

    * the mean interference lost beyond the disc, ``lam*2*pi*(a-s)**(2-alpha)/(alpha-2)``,
      is at most ``rel_truncation_error`` times the mean in-disc interference
      (path loss capped at one inside unit distance);
    * when ``omega_max`` is given, ``omega_max*(a-s)**-alpha <= rel_truncation_error``,
      so every truncated interferer sits in the regime where replacing it by
      its mean is accurate.

    ``omega_max`` is capped where the marginal transform drops below
    ``NEGLIGIBLE_TRANSFORM``: events with larger arguments are outages with
    overwhelming probability, so their accuracy does not need a larger disc.
    """
    a = scenario.alpha
    if a <= 2.01:
        raise ValueError(f"window truncation is not controllable for alpha={a} <= 2.01")
    if not rel_truncation_error > 0:
        raise ValueError("rel_truncation_error must be positive")
    tol = rel_truncation_error
    s = _receiver_offset(scenario)
    # tail <= tol * in-disc mean  <=>  (a-s)^(2-alpha) <= tol*alpha/(2*(1+tol))
    gap = (tol * a / (2 * (1 + tol))) ** (-1 / (a - 2))
    if omega_max is not None and omega_max > 0:
        if scenario.lam > 0:
            cap = (-math.log(NEGLIGIBLE_TRANSFORM) / (scenario.lam * constant_C(a))) ** (a / 2)
            omega_max = min(omega_max, cap)
        gap = max(gap, (omega_max / tol) ** (1 / a))
    gap = max(gap, scenario.D)
    return s + gap


def tail_mean(receiver, center, radius: float, alpha: float) -> float:
    """``integral over |x - center| > radius of |x - receiver|**-alpha``.

    Uses the angular average ``rho**-alpha * 2F1(alpha/2, alpha/2; 1; (s/rho)**2)``
    expanded as a power series in ``s/radius``.
    """
    s = math.hypot(receiver[0] - center[0], receiver[1] - center[1])
    if s >= radius:
        raise ValueError("receiver must lie inside the window")
    beta = alpha / 2
    x2 = (s / radius) ** 2
    term, total, k = 1.0, 0.0, 0
    while True:
        piece = term * x2 ** k / (alpha - 2 + 2 * k)
        total += piece
        if piece < 1e-17 * total or k > 10000:
            break
        term *= ((beta + k) / (k + 1)) ** 2
        k += 1
    return 2 * math.pi * radius ** (2 - alpha) * total


def sample_field(scenario: NetworkScenario, window_radius: float, stream: np.random.Generator,
                 n: int = 1) -> FieldRealization:
    """Draw ``n`` marked fields in the disc and the three direct-link fadings."""
    center = window_center(scenario)
    mean = scenario.lam * math.pi * window_radius ** 2
    counts = stream.poisson(mean, size=n) if mean > 0 else np.zeros(n, dtype=np.int64)
    total = int(counts.sum())
    rad = window_radius * np.sqrt(stream.random(total))
    ang = 2 * math.pi * stream.random(total)
    points = np.column_stack([center[0] + rad * np.cos(ang), center[1] + rad * np.sin(ang)])
    marks_r = _cn(stream, total)
    marks_d = _cn(stream, total)
    h = _cn(stream, 3 * n).reshape(3, n)
    owner = np.repeat(np.arange(n), counts)
    return FieldRealization(points, owner, marks_r, marks_d, h[0], h[1], h[2],
                            window_radius, center)


def interference(realization: FieldRealization, scenario: NetworkScenario,
                 tail: bool = True) -> InterferenceState:
    """Interference powers at relay and destination and their correlation."""
    n = realization.n
    a = scenario.alpha
    p = realization.points
    rx, ry = scenario.relay
    dx, dy = scenario.destination
    lr = np.maximum(np.hypot(p[:, 0] - rx, p[:, 1] - ry), MIN_DISTANCE) ** (-a)
    ld = np.maximum(np.hypot(p[:, 0] - dx, p[:, 1] - dy), MIN_DISTANCE) ** (-a)
    own = realization.owner
    I_r = np.bincount(own, weights=np.abs(realization.marks_r) ** 2 * lr, minlength=n)
    I_d = np.bincount(own, weights=np.abs(realization.marks_d) ** 2 * ld, minlength=n)
    cross = realization.marks_r * np.conj(realization.marks_d) * np.sqrt(lr * ld)
    num = (np.bincount(own, weights=cross.real, minlength=n)
           + 1j * np.bincount(own, weights=cross.imag, minlength=n))
    if tail and scenario.lam > 0:
        c, R = realization.center, realization.window_radius
        I_r = I_r + scenario.lam * tail_mean(scenario.relay, c, R, a)
        I_d = I_d + scenario.lam * tail_mean(scenario.destination, c, R, a)
    prod = I_r * I_d
    with np.errstate(invalid="ignore", divide="ignore"):
        rho = np.where(prod > 0, num / np.sqrt(np.where(prod > 0, prod, 1.0)), 0.0)
    free = (I_r == 0) & (I_d == 0)
    return InterferenceState(I_r, I_d, rho, free)


def _ratio(num, den):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), np.inf)


def _log2p(x):
    return np.log1p(x) / math.log(2)


def dt_outage_indicator(state: InterferenceState, realization: FieldRealization,
                        scenario: NetworkScenario) -> np.ndarray:
    g = scenario.gains()
    snr = _ratio(np.abs(realization.h_sd) ** 2 * g.l_sd, state.I_d)
    return (snr < threshold_T(scenario.rate)) & ~state.interference_free


def df_events(state, realization, scenario, rho):
    """Boolean arrays ``(relay_fails, coop_fails, dt_fails)``."""
    g = scenario.gains()
    T = threshold_T(scenario.rate)
    r2 = min(abs(complex(rho)), 1.0) ** 2
    h_sd, h_rd, h_sr = realization.h_sd, realization.h_rd, realization.h_sr
    relay_fails = _ratio(np.abs(h_sr) ** 2 * g.l_sr * (1 - r2), state.I_r) < T
    z = (np.abs(h_sd) ** 2 * g.l_sd + np.abs(h_rd) ** 2 * g.l_rd
         + 2 * math.sqrt(g.l_sd * g.l_rd) * np.real(complex(rho) * h_sd * np.conj(h_rd)))
    coop_fails = _ratio(z, state.I_d) < T
    dt_fails = _ratio(np.abs(h_sd) ** 2 * g.l_sd, state.I_d) < T
    free = state.interference_free
    return relay_fails & ~free, coop_fails & ~free, dt_fails & ~free


def df_outage_indicator(state, realization, scenario, rho=0.0) -> np.ndarray:
    a, b, dt = df_events(state, realization, scenario, rho)
    return (~a & b) | (a & dt)


def sdf_outage_indicator(state, realization, scenario, epsilon: float) -> np.ndarray:
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    g = scenario.gains()
    R = scenario.rate
    s_r = _ratio(np.abs(realization.h_sr) ** 2 * g.l_sr, state.I_r)
    s_d = _ratio(np.abs(realization.h_sd) ** 2 * g.l_sd, state.I_d)
    s_rd = _ratio(np.abs(realization.h_rd) ** 2 * g.l_rd, state.I_d)
    relay_fails = s_r < threshold_T(R / epsilon)
    dt_fails = s_d < threshold_T(R)
    with np.errstate(invalid="ignore"):
        r_sdf = epsilon * _log2p(s_d) + (1 - epsilon) * _log2p(s_d + s_rd)
    out = np.where(relay_fails, dt_fails, r_sdf < R)
    return out & ~state.interference_free


def cf_rates(u, v, w, k, rho_N):
    """Gaussian compress-and-forward rates ``(R1, R2)`` in normalized form.

    Args:
        u: ``h_sd*sqrt(l_sd/I_d)``, complex.
        v: ``h_sr*sqrt(l_sr/I_r)``, complex.
        w: relay-destination SIR ``|h_rd|^2*l_rd/I_d``.
        k: compression variance over relay interference, ``nc/I_r``.
        rho_N: interference correlation ``E[Z_r Z_d*]/sqrt(I_r I_d)``.
    """
    u, v, rho_N = np.asarray(u), np.asarray(v), np.asarray(rho_N)
    r2 = np.minimum(np.abs(rho_N) ** 2, 1.0)
    su = np.abs(u) ** 2
    r1 = _log2p(su + w) - _log2p((1 - r2) / k)
    r2_rate = _log2p(su + np.abs(rho_N * u - v) ** 2 / (1 + k - r2))
    return r1, r2_rate


def cf_condition_violated(u, v, w, k, rho_N):
    """True where the relay-destination link cannot carry the compressed signal."""
    cross = np.real(rho_N * u * np.conj(v))
    need = np.abs(u) ** 2 + np.abs(v) ** 2 - 2 * cross + 1
    return k * w < need


def _cf_normalized(state, realization, scenario, nc):
    g = scenario.gains()
    with np.errstate(divide="ignore", invalid="ignore"):
        u = realization.h_sd * np.sqrt(g.l_sd / state.I_d)
        v = realization.h_sr * np.sqrt(g.l_sr / state.I_r)
        w = np.abs(realization.h_rd) ** 2 * g.l_rd / state.I_d
        k = nc / state.I_r
    return u, v, w, k


def cf_outage_indicator(state, realization, scenario, nc: float) -> np.ndarray:
    """Outage of CF with the realization's actual interference correlation."""
    if not nc > 0:
        raise ValueError("nc must be positive")
    u, v, w, k = _cf_normalized(state, realization, scenario, nc)
    free = state.interference_free
    with np.errstate(divide="ignore", invalid="ignore"):
        _, r2 = cf_rates(u, v, w, k, state.rho_N)
        violated = cf_condition_violated(u, v, w, k, state.rho_N)
    out = (r2 < scenario.rate) | violated
    return out & ~free


def cf_rate_pair(state, realization, scenario, nc: float):
    """``(R_CF(rho_N), R_CF(0))`` per realization, for the one-bit gap check."""
    u, v, w, k = _cf_normalized(state, realization, scenario, nc)
    with np.errstate(divide="ignore", invalid="ignore"):
        a1, a2 = cf_rates(u, v, w, k, state.rho_N)
        b1, b2 = cf_rates(u, v, w, k, np.zeros_like(state.rho_N))
    keep = ~state.interference_free
    return np.minimum(a1, a2)[keep], np.minimum(b1, b2)[keep]


def indicator_for(params: ProtocolParams) -> Callable:
    p = params.protocol
    if p == Protocol.DT:
        return lambda st, re, sc: dt_outage_indicator(st, re, sc)
    if p == Protocol.DF:
        return lambda st, re, sc: df_outage_indicator(st, re, sc, params.rho)
    if p == Protocol.SDF:
        return lambda st, re, sc: sdf_outage_indicator(st, re, sc, params.epsilon)
    return lambda st, re, sc: cf_outage_indicator(st, re, sc, params.nc)


def run_chunks(scenario: NetworkScenario, n_samples: int, seed: int, stat: Callable,
               window_radius: float, workers: int = 1, tail: bool = True):
    """Apply ``stat(state, realization)`` to every chunk and return per-chunk results in order."""
    n_chunks = -(-n_samples // CHUNK)

    def one(c):
        n = min(CHUNK, n_samples - c * CHUNK)
        rng = chunk_stream(seed, c)
        real = sample_field(scenario, window_radius, rng, n)
        return stat(interference(real, scenario, tail), real)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, range(n_chunks)))
    return [one(c) for c in range(n_chunks)]


def estimate_outage(scenario: NetworkScenario, params: ProtocolParams, n_samples: int = 10**6,
                    seed: int = 0, workers: int = 1, window_radius: float | None = None,
                    rel_truncation_error: float = DEFAULT_TRUNCATION) -> OutageEstimate:
    if n_samples < 1000:
        raise ValueError("n_samples must be at least 1000")
    if scenario.lam == 0:
        return OutageEstimate(0.0, 0.0, n_samples, seed)
    if window_radius is None:
        window_radius = choose_window(scenario, rel_truncation_error, worst_omega(scenario, params))
    ind = indicator_for(params)
    hits = run_chunks(scenario, n_samples, seed,
                      lambda st, re: int(np.count_nonzero(ind(st, re, scenario))),
                      window_radius, workers)
    return OutageEstimate.from_count(sum(hits), n_samples, seed)


def estimate_events(scenario: NetworkScenario, events: Callable, n_samples: int, seed: int,
                    omega_max: float | None = None, workers: int = 1,
                    rel_truncation_error: float = DEFAULT_TRUNCATION) -> list[OutageEstimate]:
    """Estimate several event probabilities from the same fields.

    ``events(state, realization)`` returns a sequence of boolean arrays.
    """
    radius = choose_window(scenario, rel_truncation_error, omega_max)
    parts = run_chunks(scenario, n_samples, seed,
                       lambda st, re: [int(np.count_nonzero(e)) for e in events(st, re)],
                       radius, workers)
    totals = np.sum(np.array(parts, dtype=np.int64), axis=0)
    return [OutageEstimate.from_count(int(t), n_samples, seed) for t in totals]


def mc_joint_laplace(scenario: NetworkScenario, omega1: float, omega2: float,
                     n_samples: int = 10**6, seed: int = 0, workers: int = 1,
                     rel_truncation_error: float = DEFAULT_TRUNCATION) -> MeanEstimate:
    """Empirical ``E[exp(-omega1*I_d - omega2*I_r)]``."""
    if (omega1 == 0 and omega2 == 0) or scenario.lam == 0:
        return MeanEstimate(1.0, 0.0, n_samples, seed)
    radius = choose_window(scenario, rel_truncation_error, max(omega1, omega2))

    def stat(st, re):
        x = np.exp(-omega1 * st.I_d - omega2 * st.I_r)
        return float(x.sum()), float((x * x).sum())

    parts = run_chunks(scenario, n_samples, seed, stat, radius, workers)
    s = math.fsum(p[0] for p in parts)
    s2 = math.fsum(p[1] for p in parts)
    mean = s / n_samples
    var = max(s2 / n_samples - mean * mean, 0.0) * n_samples / (n_samples - 1)
    return MeanEstimate(mean, math.sqrt(var / n_samples), n_samples, seed)
