"""Sweep configuration: flat ``key = value`` files plus command-line overrides."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields

import numpy as np

from .combiner import DesignMethod
from .errors import ConfigError

PHASE_MODES = ("unconstrained", "phase_only")
MODELS = ("exp", "ray")
_SECTION = "sweep"


def _csv_floats(text):
    return tuple(float(x) for x in text.split(",") if x.strip())


def _csv_names(text):
    return tuple(x.strip() for x in text.split(",") if x.strip())


@dataclass(frozen=True)
class SweepConfig:
    m: int = 64
    l: int = 8  # noqa: E741
    t: int = 1
    k: int = 1
    a: float = 0.8
    model: str = "exp"
    ray_paths: int = 6
    ray_spread_deg: float = 10.0
    ray_mean_deg: float = 0.0
    snr_db: tuple = (0.0,)
    methods: tuple = ("sequential",)
    phase_mode: str = "unconstrained"
    quant_bits: int = 0
    trials: int = 10000
    n_c: int = 0
    epsilon: float = 1e-8
    max_iter: int = 100
    seed: int = 0
    rho_db: float | None = None
    output_path: str | None = field(default=None, compare=False)

    def __post_init__(self):
        _check(self.m >= 1, "m", "must be >= 1")
        _check(1 <= self.l <= self.m, "l", f"must satisfy 1 <= l <= m (got l={self.l}, m={self.m})")
        _check(self.t >= 1, "t", "must be >= 1")
        _check(self.k >= 1, "k", "must be >= 1")
        _check(0.0 <= self.a < 1.0, "a", "must lie in [0, 1)")
        _check(self.model in MODELS, "model", f"must be one of {', '.join(MODELS)}")
        _check(self.ray_paths >= 1, "ray_paths", "must be >= 1")
        _check(self.ray_spread_deg >= 0.0, "ray_spread_deg", "must be >= 0")
        _check(len(self.snr_db) > 0, "snr_db", "grid must be nonempty")
        _check(len(self.methods) > 0, "methods", "must be nonempty")
        valid = {m.value for m in DesignMethod}
        for name in self.methods:
            _check(name in valid, "methods", f"unknown method {name!r}")
        _check(len(set(self.methods)) == len(self.methods), "methods", "contains duplicates")
        _check(self.phase_mode in PHASE_MODES, "phase_mode", f"must be one of {', '.join(PHASE_MODES)}")
        _check(self.quant_bits >= 0, "quant_bits", "must be >= 0")
        _check(self.trials >= 1, "trials", "must be >= 1")
        _check(self.n_c >= 0, "n_c", "must be >= 0")
        _check(self.epsilon > 0.0, "epsilon", "must be positive")
        _check(self.max_iter >= 1, "max_iter", "must be >= 1")
        _check(0 <= self.seed < 2**64, "seed", "must be an unsigned 64-bit integer")
        if "block_selection" in self.methods:
            _check(self.t * self.l <= self.m, "t", "block_selection needs t*l <= m")
        if self.rho_db is not None:
            _check(np.isfinite(self.rho_db), "rho_db", "must be finite")
        if self.n_c > 0:
            _check(self.m % self.l == 0, "l", "covariance estimation needs l to divide m")


def _check(ok, name, message):
    if not ok:
        raise ConfigError(f"{name}: {message}", field=name)


_CONVERTERS = {
    "m": int,
    "l": int,
    "t": int,
    "k": int,
    "a": float,
    "model": str.strip,
    "ray_paths": int,
    "ray_spread_deg": float,
    "ray_mean_deg": float,
    "snr_db": _csv_floats,
    "methods": _csv_names,
    "phase_mode": str.strip,
    "quant_bits": int,
    "trials": int,
    "n_c": int,
    "epsilon": float,
    "max_iter": int,
    "seed": int,
    "rho_db": float,
}
KEYS = tuple(_CONVERTERS)


def convert(key, value):
    """Convert one raw value (string or already typed) for ``key``."""
    if key not in _CONVERTERS:
        raise ConfigError(f"unknown key {key!r}", field=key)
    if not isinstance(value, str):
        return tuple(value) if key in ("snr_db", "methods") else value
    try:
        return _CONVERTERS[key](value.strip())
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {value!r}", field=key) from exc


def read_config_file(path):
    """Raw ``{key: string}`` pairs from a flat config file; ``#``/``;`` start comments."""
    parser = configparser.ConfigParser(
        strict=True, interpolation=None, comment_prefixes=("#", ";"), inline_comment_prefixes=("#",)
    )
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_string(f"[{_SECTION}]\n" + fh.read(), source=str(path))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r}", field=exc.option) from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    if parser.sections() != [_SECTION]:
        raise ConfigError("config files are flat: section headers are not allowed")
    return dict(parser.items(_SECTION))


def parse_config(path=None, overrides=None):
    """Build a validated :class:`SweepConfig`.

    Values come from the defaults, then the file at ``path``, then
    ``overrides`` (a mapping of key to string or typed value; ``None`` values
    are ignored, and ``output_path`` is accepted there too).
    """
    values = {}
    if path is not None:
        for key, raw in read_config_file(path).items():
            values[key] = convert(key, raw)
    output_path = None
    for key, raw in (overrides or {}).items():
        if raw is None:
            continue
        if key == "output_path":
            output_path = raw
        else:
            values[key] = convert(key, raw)
    return SweepConfig(**values, output_path=output_path)


def config_items(cfg):
    return {f.name: getattr(cfg, f.name) for f in fields(cfg) if f.name != "output_path"}
