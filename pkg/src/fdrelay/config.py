"""Flat ``key = value`` experiment configuration files.

Lines starting with ``#`` and blank lines are ignored. Keys are case
sensitive; unknown keys are rejected so that typos do not silently fall back
to defaults. Example::

    # relay half way between source and destination
    D = 10
    relay_x = 5
    relay_y = 0
    lambda = 1e-4
    rate = 0.5
    sweep_var = lambda
    sweep_values = 1e-5, 1e-4, 1e-3
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

from .model import NetworkScenario, Protocol, ProtocolParams

METHODS = ("analytic", "bound", "montecarlo")

#: Methods each protocol supports. CF and SDF only have bounds in closed form.
SUPPORTED_METHODS = {
    Protocol.DT: ("analytic", "montecarlo"),
    Protocol.DF: ("analytic", "bound", "montecarlo"),
    Protocol.SDF: ("bound", "montecarlo"),
    Protocol.CF: ("bound", "montecarlo"),
}

SWEEP_VARS = ("lambda", "rate", "rho", "epsilon", "nc", "n_slabs", "relay_x", "relay_y",
              "alpha", "D")


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one CLI run needs.

    ``nc = None`` means the heuristic ``l_sr/l_rd`` for the current geometry.
    """

    D: float = 10.0
    relay_x: float = 5.0
    relay_y: float = 0.0
    alpha: float = 4.0
    lam: float = 1e-4
    rate: float = 0.5
    protocol: Protocol = Protocol.DF
    rho: float = 0.0
    epsilon: float = 0.5
    nc: float | None = None
    n_slabs: int = 64
    methods: tuple[str, ...] = ("analytic",)
    with_dt: bool = False
    samples: int = 10**6
    seed: int = 0
    rel_tol: float = 1e-7
    target_op: float = 0.05
    sweep_var: str | None = None
    sweep_values: tuple[float, ...] = field(default_factory=tuple)
    workers: int = 1
    #: names of the fields set by the file or the command line
    explicit: frozenset = field(default=frozenset(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "protocol", Protocol(self.protocol))
        if not self.methods:
            raise ConfigError("at least one method is required")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}; expected one of {METHODS}")
            if m not in SUPPORTED_METHODS[self.protocol]:
                raise ConfigError(f"method {m!r} is not available for {self.protocol.value}")
        if self.protocol == Protocol.DF and "bound" in self.methods and self.rho != 0:
            raise ConfigError("the DF upper bound assumes uncorrelated symbols (rho = 0)")
        if self.sweep_var is not None:
            if self.sweep_var not in SWEEP_VARS:
                raise ConfigError(f"cannot sweep {self.sweep_var!r}; expected one of {SWEEP_VARS}")
            if not self.sweep_values:
                raise ConfigError("sweep_values must be non-empty")
            if list(self.sweep_values) != sorted(self.sweep_values):
                raise ConfigError("sweep_values must be sorted in increasing order")
        elif self.sweep_values:
            raise ConfigError("sweep_values given without sweep_var")
        if self.samples < 1000:
            raise ConfigError("samples must be at least 1000")
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if not 0 < self.target_op < 1:
            raise ConfigError("target_op must lie in (0, 1)")
        if not self.rel_tol > 0:
            raise ConfigError("rel_tol must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        try:
            self.scenario()
            self.params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def scenario(self, **override) -> NetworkScenario:
        c = self.with_value(**override) if override else self
        return NetworkScenario(D=c.D, relay=(c.relay_x, c.relay_y), alpha=c.alpha, lam=c.lam,
                               rate=c.rate)

    def params(self, scenario: NetworkScenario | None = None) -> ProtocolParams:
        sc = scenario or self.scenario()
        nc = self.nc
        if nc is None:
            g = sc.gains()
            nc = g.l_sr / g.l_rd
        return ProtocolParams(self.protocol, rho=self.rho, epsilon=self.epsilon, nc=nc,
                              n_slabs=self.n_slabs)

    def with_value(self, **changes) -> "ExperimentConfig":
        """Copy with some fields replaced; ``lambda`` is accepted for ``lam``."""
        if "lambda" in changes:
            changes["lam"] = changes.pop("lambda")
        if "n_slabs" in changes:
            changes["n_slabs"] = int(changes["n_slabs"])
        return dataclasses.replace(self, **changes)


_FLOAT_KEYS = {"alpha": "alpha", "lambda": "lam", "D": "D", "relay_x": "relay_x",
               "relay_y": "relay_y", "rate": "rate", "rho": "rho", "epsilon": "epsilon",
               "rel_tol": "rel_tol", "target_op": "target_op"}
_INT_KEYS = {"n_slabs": "n_slabs", "samples": "samples", "seed": "seed", "workers": "workers"}


def _float(key, text):
    try:
        v = float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {text!r}") from None
    if not math.isfinite(v):
        raise ConfigError(f"{key}: value must be finite")
    return v


def _int(key, text):
    try:
        return int(text)
    except ValueError:
        pass
    # accept forms like 1e6 but not 10.5
    try:
        v = float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {text!r}") from None
    if not v.is_integer():
        raise ConfigError(f"{key}: expected an integer, got {text!r}")
    return int(v)


def _bool(key, text):
    t = text.lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {text!r}")


def parse_config(text: str, **overrides) -> ExperimentConfig:
    """Parse configuration text. ``overrides`` win over file values."""
    values: dict = {}
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        if key in _FLOAT_KEYS:
            values[_FLOAT_KEYS[key]] = _float(key, val)
        elif key in _INT_KEYS:
            values[_INT_KEYS[key]] = _int(key, val)
        elif key == "nc":
            values["nc"] = None if val.lower() == "auto" else _float(key, val)
        elif key == "protocol":
            try:
                values["protocol"] = Protocol(val.upper())
            except ValueError:
                raise ConfigError(f"unknown protocol {val!r}") from None
        elif key == "method":
            values["methods"] = tuple(m.strip() for m in val.split(",") if m.strip())
        elif key == "with_dt":
            values["with_dt"] = _bool(key, val)
        elif key == "sweep_var":
            values["sweep_var"] = val
        elif key == "sweep_values":
            parts = [p.strip() for p in val.split(",") if p.strip()]
            values["sweep_values"] = tuple(_float(key, p) for p in parts)
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    values.update({k: v for k, v in overrides.items() if v is not None})
    values["explicit"] = frozenset(values)
    try:
        return ExperimentConfig(**values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path | None, **overrides) -> ExperimentConfig:
    if path is None:
        return parse_config("", **overrides)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, **overrides)
