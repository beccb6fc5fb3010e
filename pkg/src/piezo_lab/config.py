"""Experiment configuration: a flat JSON object with defaults.

Every key is optional.  Unknown keys and invalid values are collected and
reported together through :class:`ConfigError`.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .discretization import PRESETS
from .model import BeamParameters, validate

PARAM_KEYS = tuple(f.name for f in fields(BeamParameters))


class ConfigError(ValueError):
    """Schema violation.  ``problems`` maps each offending key to a message."""

    def __init__(self, problems: dict):
        self.problems = dict(problems)
        super().__init__("invalid configuration: " + "; ".join(f"{k}: {v}" for k, v in self.problems.items()))

    def as_dict(self) -> dict:
        return {"error": "config", "problems": self.problems}


@dataclass(frozen=True)
class ExperimentConfig:
    rho: float = 1.0
    mu: float = 1.0
    alpha1: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    xi1: float = 1.0
    xi2: float = 1.0
    m1: float = 1.0
    m2: float = 1.0
    L: float = 1.0
    n_elements: int = 100
    dt: float | None = None
    t_end: float = 10.0
    record_every: int = 1
    initial_condition: str = "static_displacement"
    lmin: float = 1.0
    lmax: float = 60.0
    points: int = 600
    n_list: tuple[int, ...] = (50, 100, 200, 400)
    window: tuple[float, float] = (10.0, 200.0)
    band: tuple[float, float] = (10.0, 60.0)
    seed: int = 0
    backend: str | None = None

    @property
    def params(self) -> BeamParameters:
        return BeamParameters(**{k: getattr(self, k) for k in PARAM_KEYS})

    def as_dict(self) -> dict:
        d = asdict(self)
        for k in ("n_list", "window", "band"):
            d[k] = list(d[k])
        return d

    def replace(self, **changes) -> "ExperimentConfig":
        d = self.as_dict()
        d.update(changes)
        return from_dict(d)


SCHEMA_KEYS = tuple(f.name for f in fields(ExperimentConfig))


def _number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _integer(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def from_dict(raw: dict) -> ExperimentConfig:
    """Validate ``raw`` and fill in defaults."""
    if not isinstance(raw, dict):
        raise ConfigError({"<root>": "configuration must be a JSON object"})
    problems = {}
    for k in raw:
        if k not in SCHEMA_KEYS:
            problems[k] = "unknown key"
    vals = {k: v for k, v in raw.items() if k in SCHEMA_KEYS}

    for k in PARAM_KEYS + ("t_end", "lmin", "lmax"):
        if k in vals and not _number(vals[k]):
            problems[k] = "must be a number"
    for k in ("n_elements", "record_every", "points", "seed"):
        if k in vals and not _integer(vals[k]):
            problems[k] = "must be an integer"
    if "dt" in vals and vals["dt"] is not None and not _number(vals["dt"]):
        problems["dt"] = "must be a number or null"
    if "initial_condition" in vals and vals["initial_condition"] not in PRESETS:
        problems["initial_condition"] = f"must be one of {list(PRESETS)}"
    if "backend" in vals and vals["backend"] not in (None, "compiled", "python"):
        problems["backend"] = "must be 'compiled', 'python' or null"
    for k, size in (("window", 2), ("band", 2)):
        if k in vals:
            v = vals[k]
            if not (isinstance(v, (list, tuple)) and len(v) == size and all(_number(x) for x in v)):
                problems[k] = f"must be a list of {size} numbers"
            else:
                vals[k] = tuple(float(x) for x in v)
    if "n_list" in vals:
        v = vals["n_list"]
        if not (isinstance(v, (list, tuple)) and v and all(_integer(x) for x in v)):
            problems["n_list"] = "must be a non-empty list of integers"
        else:
            vals["n_list"] = tuple(v)
    # value checks run on the well-typed keys so every offence is reported
    cfg = ExperimentConfig(**{k: v for k, v in vals.items() if k not in problems})
    report = validate(cfg.params)
    for msg in report.errors:
        problems.setdefault(msg.split()[0], msg)
    value_problems = {}
    if cfg.n_elements < 2:
        value_problems["n_elements"] = "must be >= 2"
    if cfg.dt is not None and not cfg.dt > 0:
        value_problems["dt"] = "must be > 0"
    if not cfg.t_end > 0:
        value_problems["t_end"] = "must be > 0"
    if cfg.record_every < 1:
        value_problems["record_every"] = "must be >= 1"
    if not (0 <= cfg.lmin < cfg.lmax):
        value_problems["lmin"] = "need 0 <= lmin < lmax"
    if cfg.points < 2:
        value_problems["points"] = "must be >= 2"
    if any(n < 2 for n in cfg.n_list) or any(b <= a for a, b in zip(cfg.n_list, cfg.n_list[1:])):
        value_problems["n_list"] = "must be strictly increasing integers >= 2"
    if not (0 < cfg.window[0] < cfg.window[1]):
        value_problems["window"] = "need 0 < t0 < t1"
    if not (0 < cfg.band[0] < cfg.band[1]):
        value_problems["band"] = "need 0 < lo < hi"
    problems = {**value_problems, **problems}
    if problems:
        raise ConfigError(problems)
    return cfg


def load_config(path) -> ExperimentConfig:
    """Read a JSON config file; a missing path gives the defaults."""
    if path is None:
        return ExperimentConfig()
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError({"<file>": f"cannot read {path}: {exc.strerror}"}) from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError({"<file>": f"invalid JSON at line {exc.lineno}: {exc.msg}"}) from exc
    return from_dict(raw)
