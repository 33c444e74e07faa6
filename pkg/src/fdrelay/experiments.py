"""Experiment pipelines: parameter sweeps, outage capacity, DF/CF preference
maps and the analytic-versus-simulation validation report.

Every pipeline is deterministic for a fixed master seed. Work items (sweep
rows, map cells, validation scenarios) get their own seed derived from
``(master seed, item index)`` and results are collected in item order, so
the number of worker threads never changes the output.
"""

from __future__ import annotations

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import analytic, simulator
from .config import ExperimentConfig
from .laplace import LaplaceEvaluator, marginal_laplace
from .model import NetworkScenario, Protocol, ProtocolParams, constant_C, threshold_T
from .quadrature import QuadratureSpec, ToleranceNotReached

#: Listening fractions tried when optimizing the half-duplex protocol.
EPSILON_GRID = tuple(round(0.05 * k, 2) for k in range(1, 20))

#: Compression variances tried for CF, as multiples of ``l_sr/l_rd``.
NC_FACTORS = tuple(np.logspace(-3, 3, 25))

#: Z value of the two-sided 95% interval.
Z95 = 1.959963984540054


def cell_seed(master: int, index: int) -> int:
    """Seed of work item ``index`` under master seed ``master``."""
    ss = np.random.SeedSequence([int(master) % 2**64, int(index)])
    return int(ss.generate_state(1, np.uint64)[0])


def _ordered_map(fn: Callable, items: Sequence, workers: int) -> list:
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _fmt(x) -> str:
    return repr(float(x))


def nc_grid(scenario: NetworkScenario, factors=NC_FACTORS) -> list[float]:
    g = scenario.gains()
    center = g.l_sr / g.l_rd
    return [float(f) * center for f in factors]


# ---------------------------------------------------------------- sweeps

@dataclass(frozen=True)
class SweepRow:
    """One evaluated point. ``kind`` is ``<protocol>_<estimate>``, with a
    ``:unconverged`` or ``:failed`` suffix when the evaluation did not succeed."""

    axis: float
    value: float
    kind: str
    error: float

    @property
    def ok(self) -> bool:
        return ":" not in self.kind

    def csv(self) -> str:
        return f"{_fmt(self.axis)},{_fmt(self.value)},{self.kind},{_fmt(self.error)}"


SWEEP_HEADER = "axis,value,kind,error"


def evaluate_outage(scenario: NetworkScenario, params: ProtocolParams, method: str,
                    n_samples: int = 10**6, seed: int = 0, workers: int = 1,
                    spec: QuadratureSpec = QuadratureSpec(),
                    evaluator: LaplaceEvaluator | None = None) -> tuple[float, str, float]:
    """Outage of one protocol by one method as ``(value, kind, error)``.

    ``error`` is the propagated quadrature error for closed forms and the
    95% half-width for simulation.
    """
    p = params.protocol
    tag = p.value.lower()
    if method == "montecarlo":
        est = simulator.estimate_outage(scenario, params, n_samples, seed, workers=workers)
        return est.p_hat, f"{tag}_montecarlo", est.half_width
    ev = evaluator or LaplaceEvaluator(scenario, spec)
    if method == "analytic":
        if p == Protocol.DT:
            out = analytic.dt_outage(scenario)
        elif p == Protocol.DF:
            out = analytic.df_outage_exact(scenario, params.rho, ev)
        else:
            raise ValueError(f"no exact closed form for {p.value}")
    elif method == "bound":
        if p == Protocol.DF:
            if params.abs_rho != 0:
                raise ValueError("the DF upper bound assumes uncorrelated symbols (rho = 0)")
            out = analytic.df_outage_upper(scenario)
        elif p == Protocol.SDF:
            out = analytic.sdf_outage_lower(scenario, params.epsilon, ev)
        elif p == Protocol.CF:
            out = analytic.cf_outage_upper(scenario, params.nc, params.n_slabs, ev)
        else:
            raise ValueError(f"no bound for {p.value}")
    else:
        raise ValueError(f"unknown method {method!r}")
    return out.value, f"{tag}_{out.kind.value}", out.quadrature_error


def _guarded(axis, fn, default_kind) -> SweepRow:
    try:
        v, kind, err = fn()
        return SweepRow(axis, v, kind, err)
    except ToleranceNotReached:
        return SweepRow(axis, math.nan, f"{default_kind}:unconverged", math.nan)
    except (ValueError, ArithmeticError):
        return SweepRow(axis, math.nan, f"{default_kind}:failed", math.nan)


def sweep_points(config: ExperimentConfig) -> list[tuple[float, ExperimentConfig | None]]:
    """``(axis value, config)`` per grid point; ``None`` marks an invalid point."""
    if config.sweep_var is None:
        return [(math.nan, config)]
    out = []
    for x in config.sweep_values:
        try:
            out.append((x, config.with_value(**{config.sweep_var: x})))
        except ValueError:
            out.append((x, None))
    return out


def sweep(config: ExperimentConfig) -> list[SweepRow]:
    """Evaluate the configured protocol over the sweep axis.

    Without a sweep axis a single row with ``axis = nan`` is produced. Row
    failures are reported in the ``kind`` column and do not stop the run.
    """
    spec = QuadratureSpec(rel_tol=config.rel_tol)
    points = sweep_points(config)
    inner_workers = config.workers if len(points) == 1 else 1
    shared: dict = {}
    lock = threading.Lock()

    def evaluator_for(sc):
        key = (sc.D, sc.relay, sc.alpha)
        with lock:
            if key not in shared:
                shared[key] = LaplaceEvaluator(sc, spec)
            return shared[key].for_scenario(sc)

    def one(item):
        i, (x, cfg) = item
        tag = config.protocol.value.lower()
        if cfg is None:
            return [SweepRow(x, math.nan, f"{tag}_{m}:failed", math.nan) for m in config.methods]
        sc = cfg.scenario()
        params = cfg.params(sc)
        ev = evaluator_for(sc)
        seed = cell_seed(config.seed, i)
        rows = [_guarded(x, lambda m=m: evaluate_outage(sc, params, m, cfg.samples, seed,
                                                         inner_workers, spec, ev), f"{tag}_{m}")
                for m in cfg.methods]
        if cfg.with_dt and cfg.protocol != Protocol.DT:
            rows.append(_guarded(x, lambda: evaluate_outage(
                sc, ProtocolParams(Protocol.DT), "analytic"), "dt_analytic"))
        return rows

    nested = _ordered_map(one, list(enumerate(points)), config.workers)
    return [row for rows in nested for row in rows]


def rows_to_csv(header: str, rows) -> str:
    return "\n".join([header] + [r.csv() for r in rows]) + "\n"


# ---------------------------------------------------------- outage capacity

class BracketError(RuntimeError):
    """The target outage could not be bracketed by the rate interval."""


@dataclass(frozen=True)
class CapacityQuery:
    """Largest rate whose outage does not exceed ``target_op``.

    ``method`` picks the outage evaluator: ``analytic`` (DT, DF), ``bound``
    (DF upper, SDF lower, CF upper) or ``montecarlo`` (all protocols, on a
    common set of fields so the estimate is monotone in the rate).
    """

    protocol: Protocol = Protocol.DF
    method: str = "analytic"
    target_op: float = 0.05
    r_lo: float = 0.01
    r_hi: float = 8.0
    tol: float = 1e-3
    rho: float = 0.0
    n_slabs: int = 64
    epsilon_grid: tuple[float, ...] = EPSILON_GRID
    nc_factors: tuple[float, ...] = NC_FACTORS
    n_samples: int = 10**5
    seed: int = 0
    workers: int = 1
    max_widenings: int = 3

    def __post_init__(self):
        object.__setattr__(self, "protocol", Protocol(self.protocol))
        if not 0 < self.target_op < 1:
            raise ValueError("target_op must lie in (0, 1)")
        if not 0 < self.r_lo < self.r_hi:
            raise ValueError("need 0 < r_lo < r_hi")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not self.epsilon_grid or not self.nc_factors:
            raise ValueError("optimizer grids must be non-empty")


@dataclass(frozen=True)
class CapacityResult:
    rate: float
    protocol: Protocol
    parameter: float | None
    op_lo: float
    op_hi: float
    bracket: tuple[float, float]
    widenings: int


def dt_capacity(scenario: NetworkScenario, target_op: float) -> float:
    """Closed-form rate at which the direct-link outage equals ``target_op``."""
    a = scenario.alpha
    x = -math.log1p(-target_op) / (scenario.lam * constant_C(a) * scenario.D ** 2)
    return math.log2(1 + x ** (a / 2))


def _param_grid(query: CapacityQuery, scenario: NetworkScenario) -> list[ProtocolParams]:
    p = query.protocol
    if p == Protocol.SDF:
        return [ProtocolParams(p, epsilon=e) for e in query.epsilon_grid]
    if p == Protocol.CF:
        return [ProtocolParams(p, nc=nc, n_slabs=query.n_slabs)
                for nc in nc_grid(scenario, query.nc_factors)]
    return [ProtocolParams(p, rho=query.rho)]


def _param_value(params: ProtocolParams):
    if params.protocol == Protocol.SDF:
        return params.epsilon
    if params.protocol == Protocol.CF:
        return params.nc
    if params.protocol == Protocol.DF:
        return params.abs_rho
    return None


def mc_outage_grid(scenario: NetworkScenario, grid: Sequence[ProtocolParams], n_samples: int,
                   seed: int, workers: int = 1,
                   window_radius: float | None = None) -> list[simulator.OutageEstimate]:
    """Outage estimates for several protocol settings on one common set of fields."""
    if scenario.lam == 0:
        return [simulator.OutageEstimate(0.0, 0.0, n_samples, seed) for _ in grid]
    if window_radius is None:
        window_radius = simulator.choose_window(
            scenario, omega_max=max(simulator.worst_omega(scenario, p) for p in grid))
    inds = [simulator.indicator_for(p) for p in grid]

    def stat(st, re):
        return [int(np.count_nonzero(ind(st, re, scenario))) for ind in inds]

    parts = simulator.run_chunks(scenario, n_samples, seed, stat, window_radius, workers)
    totals = np.sum(np.array(parts, dtype=np.int64), axis=0)
    return [simulator.OutageEstimate.from_count(int(t), n_samples, seed) for t in totals]


class _OutageOfRate:
    """``R -> min over the parameter grid of OP(R)`` with a memo table."""

    def __init__(self, query: CapacityQuery, scenario: NetworkScenario):
        self.q = query
        self.sc = scenario
        self.grid = _param_grid(query, scenario)
        self.ev = LaplaceEvaluator(scenario)
        self.window = None
        self.memo: dict[float, tuple[float, ProtocolParams]] = {}

    def set_window(self, r_hi: float):
        if self.q.method == "montecarlo" and self.sc.lam > 0:
            top = self.sc.replace(rate=r_hi)
            self.window = simulator.choose_window(
                top, omega_max=max(simulator.worst_omega(top, p) for p in self.grid))
            self.memo.clear()

    def __call__(self, rate: float) -> tuple[float, ProtocolParams]:
        if rate in self.memo:
            return self.memo[rate]
        sc = self.sc.replace(rate=rate)
        if self.q.method == "montecarlo":
            ests = mc_outage_grid(sc, self.grid, self.q.n_samples, self.q.seed,
                                  self.q.workers, self.window)
            vals = [e.p_hat for e in ests]
        else:
            ev = self.ev.for_scenario(sc)
            vals = [evaluate_outage(sc, p, self.q.method, evaluator=ev)[0] for p in self.grid]
        i = int(np.argmin(vals))
        self.memo[rate] = (vals[i], self.grid[i])
        return self.memo[rate]


def bisect_rate(op: Callable[[float], float], target: float, lo: float, hi: float,
                tol: float = 1e-3, max_widenings: int = 3):
    """Bracket and bisect ``op(R) = target`` for an increasing ``op``.

    Returns ``(lo, hi, widenings)`` with ``op(lo) <= target < op(hi)`` and
    ``hi - lo <= tol``. Raises :class:`BracketError` if ``max_widenings``
    rounds of widening (``lo/10``, ``2*hi``) do not produce a bracket.
    """
    widenings = 0
    while True:
        lo_ok = op(lo) <= target
        hi_ok = op(hi) > target
        if lo_ok and hi_ok:
            break
        if widenings >= max_widenings:
            raise BracketError(f"no bracket for target {target} in [{lo}, {hi}]")
        widenings += 1
        if not lo_ok:
            lo /= 10
        if not hi_ok:
            hi *= 2
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if op(mid) <= target:
            lo = mid
        else:
            hi = mid
    return lo, hi, widenings


def outage_capacity(query: CapacityQuery, scenario: NetworkScenario) -> CapacityResult:
    """Outage capacity of one protocol, optimized over its parameter grid.

    The returned ``rate`` is the midpoint of the final bracket, so
    ``OP(rate - tol) <= target_op <= OP(rate + tol)``.
    """
    if scenario.lam == 0:
        raise BracketError("outage is identically zero without interferers")
    f = _OutageOfRate(query, scenario)
    hi = query.r_hi
    f.set_window(hi * 2 ** query.max_widenings)
    lo, hi, widenings = bisect_rate(lambda r: f(r)[0], query.target_op, query.r_lo, hi,
                                    query.tol, query.max_widenings)
    op_lo, best = f(lo)
    return CapacityResult(0.5 * (lo + hi), query.protocol, _param_value(best), op_lo,
                          f(hi)[0], (lo, hi), widenings)


# ----------------------------------------------------------- preference map

@dataclass(frozen=True)
class PreferenceCell:
    rx: float
    ry: float
    op_df: float
    op_cf: float
    ci_cf: float
    winner: str
    nc: float

    def csv(self) -> str:
        return (f"{_fmt(self.rx)},{_fmt(self.ry)},{_fmt(self.op_df)},{_fmt(self.op_cf)},"
                f"{_fmt(self.ci_cf)},{self.winner}")


PREFMAP_HEADER = "rx,ry,op_df,op_cf,ci_cf,winner"

PREFMAP_DEFAULT = NetworkScenario(D=10.0, relay=(5.0, 1.0), alpha=4.0, lam=0.5e-4, rate=4.0)


def preference_cell(scenario: NetworkScenario, n_samples: int, seed: int,
                    nc_factors=NC_FACTORS, pilot_fraction: float = 0.1,
                    workers: int = 1) -> PreferenceCell:
    """DF (exact, uncorrelated symbols) against CF (simulated, best ``nc``).

    The compression variance is picked on a pilot run and the reported CF
    outage comes from an independent run, so picking the best of many noisy
    estimates does not bias the comparison.
    """
    df = analytic.df_outage_exact(scenario, 0.0)
    grid = [ProtocolParams(Protocol.CF, nc=nc) for nc in nc_grid(scenario, nc_factors)]
    n_pilot = max(1000, int(n_samples * pilot_fraction))
    pilot = mc_outage_grid(scenario, grid, n_pilot, cell_seed(seed, 0), workers)
    best = grid[int(np.argmin([e.p_hat for e in pilot]))]
    cf = simulator.estimate_outage(scenario, best, n_samples, cell_seed(seed, 1), workers)
    winner = decide_winner(df.value, cf.p_hat, cf.half_width, df.quadrature_error)
    rx, ry = scenario.relay
    return PreferenceCell(rx, ry, df.value, cf.p_hat, cf.half_width, winner, best.nc)


def decide_winner(op_df: float, op_cf: float, ci_cf: float, err_df: float = 0.0) -> str:
    """``"DF"``, ``"CF"`` or ``"tie"`` when the gap is within the combined uncertainty."""
    if abs(op_df - op_cf) <= ci_cf + err_df:
        return "tie"
    return "DF" if op_df < op_cf else "CF"


def preference_map(xs: Sequence[float], ys: Sequence[float],
                   scenario: NetworkScenario = PREFMAP_DEFAULT, n_samples: int = 10**6,
                   seed: int = 0, nc_factors=NC_FACTORS, workers: int = 1) -> list[PreferenceCell]:
    """Preferred scheme on the rectangular relay grid ``xs x ys`` (row-major in ``ys``).

    ``scenario`` supplies ``D``, ``alpha``, ``lam`` and ``rate``; its relay is ignored.
    """
    cells = [(float(x), float(y)) for y in ys for x in xs]
    for x, y in cells:
        if math.hypot(x, y) < 1e-9 or math.hypot(x - scenario.D, y) < 1e-9:
            raise ValueError(f"grid point ({x}, {y}) coincides with the source or destination")

    def one(item):
        i, (x, y) = item
        return preference_cell(scenario.replace(relay=(x, y)), n_samples, cell_seed(seed, i),
                               nc_factors)

    return _ordered_map(one, list(enumerate(cells)), workers)


# --------------------------------------------------------------- validation

@dataclass(frozen=True)
class Check:
    """One validation outcome.

    ``z`` is the simulation-referenced score of the check (``nan`` for purely
    deterministic checks).
    """

    rx: float
    ry: float
    lam: float
    name: str
    observed: float
    reference: float
    z: float
    passed: bool

    def csv(self) -> str:
        return (f"{_fmt(self.rx)},{_fmt(self.ry)},{_fmt(self.lam)},{self.name},"
                f"{_fmt(self.observed)},{_fmt(self.reference)},{_fmt(self.z)},"
                f"{'pass' if self.passed else 'fail'}")


VALIDATE_HEADER = "rx,ry,lambda,check,observed,reference,z,passed"


@dataclass
class ValidationReport:
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def csv(self) -> str:
        return rows_to_csv(VALIDATE_HEADER, self.checks)


def default_validation_grid() -> list[NetworkScenario]:
    return [NetworkScenario(D=10.0, relay=r, alpha=4.0, lam=lam, rate=0.5)
            for lam in (1e-4, 1e-3) for r in ((2.0, 0.0), (5.0, 0.0), (5.0, 3.0))]


def _zscore(diff: float, sigma: float) -> float:
    if sigma > 0:
        return diff / sigma
    return 0.0 if diff == 0 else math.copysign(math.inf, diff)


def _binom_sigma(p_mc: float, p_ref: float, n: int) -> float:
    p = p_mc if 0 < p_mc < 1 else p_ref
    return math.sqrt(max(p * (1 - p), 0.0) / n)


def rate_gap_grid(n: int = 9) -> tuple[np.ndarray, np.ndarray]:
    """CF rates with and without interference correlation on a deterministic grid.

    The grid covers the three regimes of ``|v|/|u|`` relative to ``1`` and
    ``1 + k``, including the boundaries, the correlation magnitudes that
    minimize the correlated rate in each regime, ``|rho_N| = 1``, and the
    worst-case phase alignment. Returns ``(R_CF(rho_N), R_CF(0))``.
    """
    mags_u = np.logspace(-3, 3, n)
    ks = np.logspace(-3, 3, n)
    ws = np.logspace(-3, 3, 5)
    phases = np.array([0.0, 0.5, 1.0]) * math.pi
    U, K, W = (a.ravel() for a in np.meshgrid(mags_u, ks, ws, indexing="ij"))
    # |v| as a multiple of |u| (first regime boundary) and of (1+k)|u| (second)
    steps = np.concatenate([np.linspace(0.05, 0.999, n), [1.0, 1.001, 2.0, 10.0]])
    fixed_rho = np.array([0.0, 0.3, 0.7, 0.99, 1.0])
    u_all, v_all, w_all, k_all, r_all = [], [], [], [], []
    for scale in (np.ones_like(K), 1.0 + K):
        for t in steps:
            vmag = U * scale * t
            ratio = vmag / U
            critical = [np.minimum(ratio, 1.0), np.minimum((1 + K) / ratio, 1.0)]
            rhos = critical + [np.full(U.size, r) for r in fixed_rho]
            for rm in rhos:
                for ph in phases:
                    u_all.append(U.astype(complex))
                    # Re(rho u v*) = |rho||u||v|cos(ph)
                    v_all.append(vmag * np.exp(-1j * ph))
                    w_all.append(W)
                    k_all.append(K)
                    r_all.append(rm.astype(complex))
    u = np.concatenate(u_all)
    v = np.concatenate(v_all)
    w = np.concatenate(w_all)
    k = np.concatenate(k_all)
    rho = np.concatenate(r_all)
    with np.errstate(divide="ignore", invalid="ignore"):
        a1, a2 = simulator.cf_rates(u, v, w, k, rho)
        b1, b2 = simulator.cf_rates(u, v, w, k, np.zeros_like(rho))
    return np.minimum(a1, a2), np.minimum(b1, b2)


def validate(scenarios: Sequence[NetworkScenario] | None = None, n_samples: int = 10**6,
             seed: int = 42, workers: int = 1, flip_cross_sign: bool = False,
             rho_values: Sequence[float] = (0.0, 0.5), epsilon: float = 0.5,
             laplace_omega: tuple[float, float] = (1000.0, 1000.0),
             z_max: float = 3.0) -> ValidationReport:
    """Cross-check every closed form against simulation on a scenario grid.

    Each scenario is simulated once; all indicators and the transform
    estimate are evaluated on the same fields. ``flip_cross_sign`` replaces
    the transform by its wrong-sign variant and exists as a negative control.
    """
    if scenarios is None:
        scenarios = default_validation_grid()
    scenarios = list(scenarios)

    def one(item):
        i, sc = item
        return _validate_scenario(sc, n_samples, cell_seed(seed, i), flip_cross_sign,
                                  rho_values, epsilon, laplace_omega, z_max)

    report = ValidationReport()
    for checks in _ordered_map(one, list(enumerate(scenarios)), workers):
        report.checks.extend(checks)
    rc, r0 = rate_gap_grid()
    bad = int(np.count_nonzero(~analytic.cf_rate_gap_check(rc, r0)))
    report.checks.append(Check(math.nan, math.nan, math.nan, "cf_rate_gap_grid", bad, 0,
                               math.nan, bad == 0))
    return report


def _validate_scenario(sc, n, seed, flip, rho_values, epsilon, omega, z_max) -> list[Check]:
    ev = LaplaceEvaluator(sc, flip_cross_sign=flip)
    g = sc.gains()
    nc = g.l_sr / g.l_rd
    w1, w2 = omega
    rx, ry = sc.relay

    def stat(st, re):
        out = [int(np.count_nonzero(simulator.dt_outage_indicator(st, re, sc)))]
        for rho in rho_values:
            a, b, dt = simulator.df_events(st, re, sc, rho)
            out += [int(np.count_nonzero(~a & ~b)),
                    int(np.count_nonzero(a & ~dt)),
                    int(np.count_nonzero((~a & b) | (a & dt)))]
        out.append(int(np.count_nonzero(simulator.sdf_outage_indicator(st, re, sc, epsilon))))
        out.append(int(np.count_nonzero(simulator.cf_outage_indicator(st, re, sc, nc))))
        rc, r0 = simulator.cf_rate_pair(st, re, sc, nc)
        out.append(int(np.count_nonzero(~analytic.cf_rate_gap_check(rc, r0))))
        x = np.exp(-w1 * st.I_d - w2 * st.I_r)
        return out, (math.fsum(x), math.fsum(x * x))

    if sc.lam > 0:
        params = [ProtocolParams(Protocol.DF, rho=r) for r in rho_values]
        params += [ProtocolParams(Protocol.SDF, epsilon=epsilon), ProtocolParams(Protocol.CF)]
        omega_max = max([simulator.worst_omega(sc, p) for p in params] + [w1, w2])
        radius = simulator.choose_window(sc, omega_max=omega_max)
        parts = simulator.run_chunks(sc, n, seed, stat, radius)
        counts = np.sum(np.array([p[0] for p in parts], dtype=np.int64), axis=0)
        s = math.fsum(p[1][0] for p in parts)
        s2 = math.fsum(p[1][1] for p in parts)
    else:
        # no interferers: every link succeeds and the transform is one
        counts = np.array([0] + [n, 0, 0] * len(rho_values) + [0, 0, 0], dtype=np.int64)
        s = s2 = float(n)

    checks = []

    def add(name, observed, reference, z, passed):
        checks.append(Check(rx, ry, sc.lam, name, float(observed), float(reference),
                            float(z), bool(passed)))

    def agree(name, count, ref):
        p = count / n
        z = _zscore(p - ref, _binom_sigma(p, ref, n))
        add(name, p, ref, z, abs(z) <= z_max)
        return p

    agree("dt_exact", counts[0], analytic.dt_outage(sc).value)
    j = 1
    for rho in rho_values:
        tag = f"rho={rho:g}"
        agree(f"df_joint_success[{tag}]", counts[j], analytic.df_joint_success(sc, rho, ev))
        agree(f"df_relay_fails_dt_success[{tag}]", counts[j + 1],
              analytic.df_relay_fails_dt_success(sc, rho, ev))
        agree(f"df_exact[{tag}]", counts[j + 2], analytic.df_outage_exact(sc, rho, ev).value)
        j += 3
    exact0 = analytic.df_outage_exact(sc, 0.0, ev)
    upper = analytic.df_outage_upper(sc).value
    add("df_upper_bound", upper, exact0.value, math.nan,
        upper >= exact0.value - exact0.quadrature_error - 1e-12)
    dt = analytic.dt_outage(sc).value
    add("df_not_worse_than_dt", exact0.value, dt, math.nan,
        exact0.value <= dt + exact0.quadrature_error + 1e-12)

    p_sdf = counts[j] / n
    lb = analytic.sdf_outage_lower(sc, epsilon, ev).value
    z = _zscore(lb - p_sdf, _binom_sigma(p_sdf, lb, n))
    add(f"sdf_lower_bound[eps={epsilon:g}]", p_sdf, lb, z, z <= z_max)

    p_cf = counts[j + 1] / n
    ub = analytic.cf_outage_upper(sc, nc, evaluator=ev).value
    z = _zscore(ub - p_cf, _binom_sigma(p_cf, ub, n))
    add("cf_upper_bound", p_cf, ub, z, z >= -z_max)

    bad = int(counts[j + 2])
    add("cf_rate_gap", bad, 0, math.nan, bad == 0)

    mean = s / n
    var = max(s2 / n - mean * mean, 0.0) * n / (n - 1)
    joint = ev.joint(w1, w2)
    z = _zscore(joint - mean, math.sqrt(var / n))
    add("laplace_sign", mean, joint, z, abs(z) <= z_max)
    prod = marginal_laplace(w1, sc.lam, sc.alpha) * marginal_laplace(w2, sc.lam, sc.alpha)
    add("laplace_dominates_product", joint, prod, math.nan, joint >= prod)
    return checks
