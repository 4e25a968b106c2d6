"""Run configuration.

A config is one YAML file describing the flow plus optional per-experiment
sections. Every validation error names the offending field (and the line for
YAML syntax errors).

Example::

    name: golden-demo
    alpha: golden
    roof:
      g: [[1, 0.0, 0.05]]   # rows (k, a_k, b_k)
      A: 1.0
      c: 0.7
      normalize: false
    precision: 256
    step_budget: 10000000
    certify: {beta: 1.0, pairs: 500, seed: 0}
"""
from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field
from typing import Any

import yaml

from .cfrac import CFExpansion, expand
from .circle import DEFAULT_PRECISION, check_precision, default_precision
from .errors import ConfigError
from .flow import SpecialFlow
from .roof import DEFAULT_STEP_BUDGET, Roof, make_roof


@dataclass
class CertifyConfig:
    beta: float = 1.0
    pairs: int = 100
    seed: int = 0
    case_a_fraction: float = 0.0
    workers: int = 1
    explicit: list | None = None


@dataclass
class TrichotomyConfig:
    pairs: int = 200
    seed: int = 0
    depth: int = 10
    explicit: list | None = None


@dataclass
class ProfileConfig:
    p: list = field(default_factory=lambda: [0.2, 0.0])
    q: list = field(default_factory=lambda: [0.2001, 0.0])
    horizon: float = 50.0
    delta: float = 1e-3
    partition: dict | None = None
    check_gamma: dict | None = None


@dataclass
class C1DecayConfig:
    n: list | None = None
    q_range: list = field(default_factory=lambda: [3, 12])
    grid: int = 256


@dataclass
class FlowSpec:
    alpha: Any = "golden"
    g: list = field(default_factory=list)
    A: float = 1.0
    c: float = 0.5
    normalize: bool = False
    precision: int = DEFAULT_PRECISION
    step_budget: int = DEFAULT_STEP_BUDGET
    name: str = "flow"
    certify: CertifyConfig = field(default_factory=CertifyConfig)
    trichotomy: TrichotomyConfig = field(default_factory=TrichotomyConfig)
    profile: ProfileConfig = field(default_factory=ProfileConfig)
    c1decay: C1DecayConfig = field(default_factory=C1DecayConfig)

    def build_roof(self) -> Roof:
        try:
            return make_roof(self.g, self.A, self.c, self.normalize)
        except ValueError as e:
            raise ConfigError(f"roof: {e}") from e

    def build_cf(self, depth: int = 0) -> CFExpansion:
        try:
            return expand(self.alpha, depth, self.precision)
        except (ValueError, TypeError, KeyError) as e:
            raise ConfigError(f"alpha: {e}") from e

    def build_flow(self) -> SpecialFlow:
        return SpecialFlow(self.build_roof(), self.build_cf(), self.step_budget)

    def echo(self) -> dict:
        return asdict(self)


def _num(v, path: str, kind=float):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {v!r}")
    if kind is int:
        if int(v) != v:
            raise ConfigError(f"{path}: expected an integer, got {v!r}")
        return int(v)
    return float(v)


def _section(raw: dict, key: str, cls, types: dict):
    data = raw.get(key) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{key}: expected a mapping")
    obj = cls()
    for k, v in data.items():
        if not hasattr(obj, k):
            raise ConfigError(f"{key}.{k}: unknown field")
        t = types.get(k)
        if t in (int, float):
            v = _num(v, f"{key}.{k}", t)
        elif t is list and v is not None and not isinstance(v, list):
            raise ConfigError(f"{key}.{k}: expected a list")
        elif t is dict and v is not None and not isinstance(v, dict):
            raise ConfigError(f"{key}.{k}: expected a mapping")
        setattr(obj, k, v)
    return obj


def _alpha(v, path="alpha"):
    if isinstance(v, str):
        return v
    if isinstance(v, dict):
        keys = set(v)
        if keys <= {"quotients", "periodic"} and keys:
            for k in keys:
                if not isinstance(v[k], list) or not all(isinstance(a, int) and a >= 1 for a in v[k]):
                    raise ConfigError(f"{path}.{k}: expected a list of positive integers")
            return {"quotients": list(v.get("quotients", [])), "periodic": list(v.get("periodic", []))}
        if keys == {"decimal"}:
            return {"decimal": str(v["decimal"])}
        raise ConfigError(f"{path}: expected a name, {{quotients, periodic}} or {{decimal}}")
    raise ConfigError(f"{path}: expected a name or mapping, got {v!r}")


def parse_config(raw: dict) -> FlowSpec:
    if not isinstance(raw, dict):
        raise ConfigError("top level: expected a mapping")
    known = {"name", "alpha", "roof", "precision", "step_budget",
             "certify", "trichotomy", "profile", "c1decay"}
    for k in raw:
        if k not in known:
            raise ConfigError(f"{k}: unknown field")
    spec = FlowSpec()
    spec.name = str(raw.get("name", spec.name))
    spec.alpha = _alpha(raw.get("alpha", "golden"))
    roof = raw.get("roof") or {}
    if not isinstance(roof, dict):
        raise ConfigError("roof: expected a mapping")
    for k in roof:
        if k not in ("g", "A", "c", "normalize"):
            raise ConfigError(f"roof.{k}: unknown field")
    rows = roof.get("g", [])
    if not isinstance(rows, list):
        raise ConfigError("roof.g: expected a list of [k, a_k, b_k] rows")
    g = []
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != 3:
            raise ConfigError(f"roof.g[{i}]: expected [k, a_k, b_k]")
        k = _num(row[0], f"roof.g[{i}][0]", int)
        if k < 1:
            raise ConfigError(f"roof.g[{i}][0]: harmonic index must be >= 1")
        g.append([k, _num(row[1], f"roof.g[{i}][1]"), _num(row[2], f"roof.g[{i}][2]")])
    spec.g = g
    spec.A = _num(roof.get("A", spec.A), "roof.A")
    if spec.A == 0:
        raise ConfigError("roof.A: slope must be non-zero")
    spec.c = _num(roof.get("c", spec.c), "roof.c")
    norm = roof.get("normalize", False)
    if not isinstance(norm, bool):
        raise ConfigError("roof.normalize: expected true or false")
    spec.normalize = norm
    if "precision" in raw:
        spec.precision = _num(raw["precision"], "precision", int)
    else:
        try:
            spec.precision = default_precision()
        except ValueError as e:
            raise ConfigError(str(e)) from e
    try:
        check_precision(spec.precision)
    except ValueError as e:
        raise ConfigError(f"precision: {e}") from e
    spec.step_budget = _num(raw.get("step_budget", spec.step_budget), "step_budget", int)
    if spec.step_budget < 1:
        raise ConfigError("step_budget: must be positive")
    spec.certify = _section(raw, "certify", CertifyConfig,
                            {"beta": float, "pairs": int, "seed": int, "case_a_fraction": float,
                             "workers": int, "explicit": list})
    spec.trichotomy = _section(raw, "trichotomy", TrichotomyConfig,
                               {"pairs": int, "seed": int, "depth": int, "explicit": list})
    spec.profile = _section(raw, "profile", ProfileConfig,
                            {"p": list, "q": list, "horizon": float, "delta": float,
                             "partition": dict, "check_gamma": dict})
    spec.c1decay = _section(raw, "c1decay", C1DecayConfig, {"n": list, "q_range": list, "grid": int})
    return spec


def load_config(path: str | os.PathLike | None) -> FlowSpec:
    """Read a YAML config; ``None`` gives the defaults."""
    if path is None:
        return parse_config({})
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    return loads_config(text)


def loads_config(text: str) -> FlowSpec:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}: " if mark else ""
        raise ConfigError(f"{where}invalid YAML ({getattr(e, 'problem', e)})") from e
    return parse_config(raw or {})


__all__ = ["FlowSpec", "CertifyConfig", "TrichotomyConfig", "ProfileConfig", "C1DecayConfig",
           "load_config", "loads_config", "parse_config"]
