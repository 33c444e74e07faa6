"""Command-line interface.

Exit codes: 0 success, 1 validation failure, 2 configuration error,
3 numerical tolerance failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from . import experiments, simulator
from .config import ConfigError, ExperimentConfig, load_config
from .laplace import LaplaceEvaluator, marginal_laplace
from .model import NetworkScenario
from .quadrature import QuadratureSpec, ToleranceNotReached

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _pair(text: str) -> tuple[float, float]:
    vals = _floats(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError(f"expected 'w1,w2', got {text!r}")
    return vals[0], vals[1]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value configuration file")
    common.add_argument("--seed", type=_u64, help="master seed (unsigned 64-bit)")
    common.add_argument("--samples", type=int, help="Monte Carlo samples per estimate")
    common.add_argument("--out", help="output CSV path (default: stdout)")
    common.add_argument("--method", choices=("analytic", "bound", "montecarlo"),
                        help="outage evaluator, overrides the config file")
    common.add_argument("--format", choices=("csv",), default="csv")
    common.add_argument("--workers", type=int, help="worker threads (results do not depend on it)")
    common.add_argument("--plot", action="store_true",
                        help="also render a PNG figure next to the CSV output")

    p = argparse.ArgumentParser(prog="fdrelay",
                                description="Outage of full-duplex relaying in Poisson interference")
    sub = p.add_subparsers(dest="command", required=True)
    lp = sub.add_parser("laplace", parents=[common], help="evaluate interference transforms")
    lp.add_argument("--omega", type=_pair, action="append", metavar="W1,W2",
                    help="transform arguments (destination, relay); repeatable")
    sub.add_parser("op", parents=[common], help="single outage probability")
    sub.add_parser("sweep", parents=[common], help="outage over a parameter grid")
    sub.add_parser("capacity", parents=[common], help="outage capacity by bisection")
    pm = sub.add_parser("prefmap", parents=[common], help="DF versus CF preference map")
    pm.add_argument("--xs", type=_floats, default=[1.0, 3.0, 5.0, 7.0, 9.0],
                    help="relay x grid, comma-separated")
    pm.add_argument("--ys", type=_floats, default=[0.0, 2.0, 4.0],
                    help="relay y grid, comma-separated")
    vp = sub.add_parser("validate", parents=[common], help="analytic versus simulation report")
    vp.add_argument("--flip-cross-sign", action="store_true", help=argparse.SUPPRESS)
    return p


def _load(args, **extra) -> ExperimentConfig:
    overrides = dict(seed=args.seed, samples=args.samples, workers=args.workers, **extra)
    if args.method is not None:
        overrides["methods"] = (args.method,)
    return load_config(args.config, **overrides)


def _emit(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _require_out_for_plot(args):
    if args.plot and args.out is None:
        raise ConfigError("--plot needs --out so the figure has a place to go")


def cmd_laplace(args) -> int:
    cfg = _load(args)
    method = cfg.methods[0] if args.method else "analytic"
    if method == "bound":
        raise ConfigError("laplace supports --method analytic or montecarlo")
    omegas = args.omega or [(0.5, 0.5)]
    sc = cfg.scenario()
    lines = ["omega1,omega2,value,kind,error"]
    status = EXIT_OK
    if method == "analytic":
        ev = LaplaceEvaluator(sc, QuadratureSpec(rel_tol=cfg.rel_tol))
        for w1, w2 in omegas:
            try:
                v = ev.joint(w1, w2)
                e = ev.quadrature_error(w1, w2)
                lines.append(f"{w1!r},{w2!r},{v!r},joint,{e!r}")
            except ToleranceNotReached:
                lines.append(f"{w1!r},{w2!r},nan,joint:unconverged,nan")
                status = EXIT_NUMERIC
            prod = marginal_laplace(w1, sc.lam, sc.alpha) * marginal_laplace(w2, sc.lam, sc.alpha)
            lines.append(f"{w1!r},{w2!r},{prod!r},marginal_product,0.0")
    else:
        for i, (w1, w2) in enumerate(omegas):
            est = simulator.mc_joint_laplace(sc, w1, w2, cfg.samples,
                                             experiments.cell_seed(cfg.seed, i), cfg.workers)
            lines.append(f"{w1!r},{w2!r},{est.mean!r},montecarlo,{est.half_width!r}")
    _emit("\n".join(lines) + "\n", args.out)
    return status


def cmd_op(args) -> int:
    cfg = _load(args)
    sc = cfg.scenario()
    params = cfg.params(sc)
    lines = ["protocol,value,kind,error"]
    status = EXIT_OK
    for m in cfg.methods:
        try:
            v, kind, err = experiments.evaluate_outage(
                sc, params, m, cfg.samples, cfg.seed, cfg.workers,
                QuadratureSpec(rel_tol=cfg.rel_tol))
        except ToleranceNotReached:
            v, kind, err = math.nan, f"{params.protocol.value.lower()}_{m}:unconverged", math.nan
            status = EXIT_NUMERIC
        lines.append(f"{params.protocol.value},{v!r},{kind},{err!r}")
    _emit("\n".join(lines) + "\n", args.out)
    return status


def cmd_sweep(args) -> int:
    _require_out_for_plot(args)
    cfg = _load(args)
    rows = experiments.sweep(cfg)
    _emit(experiments.rows_to_csv(experiments.SWEEP_HEADER, rows), args.out)
    if args.plot:
        from . import plotting
        plotting.plot_sweep(rows, plotting.figure_path(args.out), xlabel=cfg.sweep_var or "axis",
                            logx=cfg.sweep_var == "lambda" and min(cfg.sweep_values) > 0)
    return EXIT_OK if all(r.ok for r in rows) else EXIT_NUMERIC


def cmd_capacity(args) -> int:
    _require_out_for_plot(args)
    cfg = _load(args)
    method = cfg.methods[0]
    tag = f"{cfg.protocol.value.lower()}_capacity"
    points = experiments.sweep_points(cfg)

    def one(item):
        i, (x, c) = item
        if c is None:
            return experiments.SweepRow(x, math.nan, f"{tag}:failed", math.nan)
        try:
            sc = c.scenario()
            q = experiments.CapacityQuery(protocol=c.protocol, method=method,
                                          target_op=c.target_op, rho=c.rho, n_slabs=c.n_slabs,
                                          n_samples=c.samples,
                                          seed=experiments.cell_seed(cfg.seed, i))
            res = experiments.outage_capacity(q, sc)
            return experiments.SweepRow(x, res.rate, tag, res.bracket[1] - res.bracket[0])
        except experiments.BracketError:
            return experiments.SweepRow(x, math.nan, f"{tag}:no_bracket", math.nan)
        except ToleranceNotReached:
            return experiments.SweepRow(x, math.nan, f"{tag}:unconverged", math.nan)
        except ValueError:
            return experiments.SweepRow(x, math.nan, f"{tag}:failed", math.nan)

    rows = experiments._ordered_map(one, list(enumerate(points)), cfg.workers)
    _emit(experiments.rows_to_csv(experiments.SWEEP_HEADER, rows), args.out)
    if args.plot:
        from . import plotting
        plotting.plot_sweep(rows, plotting.figure_path(args.out), xlabel=cfg.sweep_var or "axis",
                            ylabel="outage capacity (bits/use)")
    return EXIT_OK if all(r.ok for r in rows) else EXIT_NUMERIC


def cmd_prefmap(args) -> int:
    _require_out_for_plot(args)
    cfg = _load(args)
    base = experiments.PREFMAP_DEFAULT
    sc = NetworkScenario(D=cfg.D if "D" in cfg.explicit else base.D, relay=base.relay,
                         alpha=cfg.alpha if "alpha" in cfg.explicit else base.alpha,
                         lam=cfg.lam if "lam" in cfg.explicit else base.lam,
                         rate=cfg.rate if "rate" in cfg.explicit else base.rate)
    try:
        cells = experiments.preference_map(args.xs, args.ys, sc, cfg.samples, cfg.seed,
                                           workers=cfg.workers)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    _emit(experiments.rows_to_csv(experiments.PREFMAP_HEADER, cells), args.out)
    if args.plot:
        from . import plotting
        plotting.plot_preference_map(cells, plotting.figure_path(args.out), D=sc.D)
    return EXIT_OK


def cmd_validate(args) -> int:
    _require_out_for_plot(args)
    cfg = _load(args)
    grid = experiments.default_validation_grid()
    if "lam" in cfg.explicit:
        grid = [s.replace(lam=cfg.lam) for s in grid]
    if {"relay_x", "relay_y"} & cfg.explicit:
        grid = [s.replace(relay=(cfg.relay_x, cfg.relay_y)) for s in grid]
    for key in ("D", "alpha", "rate"):
        if key in cfg.explicit:
            grid = [s.replace(**{key: getattr(cfg, key)}) for s in grid]
    grid = list(dict.fromkeys(grid))
    seed = cfg.seed if "seed" in cfg.explicit else 42
    report = experiments.validate(grid, cfg.samples, seed, cfg.workers,
                                  flip_cross_sign=args.flip_cross_sign)
    _emit(report.csv(), args.out)
    if args.plot:
        from . import plotting
        plotting.plot_validation(report, plotting.figure_path(args.out))
    return EXIT_OK if report.passed else EXIT_VALIDATION


COMMANDS = {"laplace": cmd_laplace, "op": cmd_op, "sweep": cmd_sweep, "capacity": cmd_capacity,
            "prefmap": cmd_prefmap, "validate": cmd_validate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ToleranceNotReached, experiments.BracketError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
