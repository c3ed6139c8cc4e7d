"""Experiment configs: JSON in, validated dataclass out.

Every command has a fixed key set; unknown keys, missing keys and bad
values raise :class:`ConfigError` before any computation starts.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .exchange import SharingSpec, check_division_law
from . import specfun
from .specfun import DistributionSpec, DomainError


class ConfigError(ValueError):
    pass


COMMON = {"seed", "replicas", "threads"}

# command -> (required keys, optional keys)
SCHEMAS = {
    "simulate-renewal": ({"F", "n"}, set()),
    "shift": ({"G"}, {"model", "F", "n", "input", "tests"}),
    "iterate": ({"G", "steps"}, {"model", "F", "n", "input", "tests", "target", "snapshots"}),
    "exchange": ({"F", "sharing", "n", "steps"}, {"model", "snapshots"}),
    "rwre": ({"sharing", "ns"}, {"N", "F"}),
    "euler": ({"F", "p", "ns"}, set()),
}

TESTS = ("ks", "lag", "chi2")


@dataclass
class ExperimentConfig:
    command: str
    seed: int
    replicas: int = 1000
    threads: int = 1
    model: str | None = None
    F: DistributionSpec | None = None
    G: DistributionSpec | None = None
    sharing: SharingSpec | None = None
    n: int | None = None
    steps: int = 0
    snapshots: list = field(default_factory=list)
    ns: list = field(default_factory=list)
    p: float | None = None
    N: int | None = None
    tests: list = field(default_factory=lambda: ["ks"])
    target: DistributionSpec | None = None
    input: str | None = None


def _int(d, key, minimum=0):
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
        raise ConfigError(f"'{key}' must be an integer >= {minimum}, got {v!r}")
    return v


def _int_list(d, key, minimum=0):
    v = d[key]
    if not isinstance(v, list) or any(isinstance(x, bool) or not isinstance(x, int) or x < minimum for x in v):
        raise ConfigError(f"'{key}' must be a list of integers >= {minimum}")
    return list(v)


def build_config(command: str, raw: dict, *, seed: int | None = None, replicas: int | None = None,
                 threads: int | None = None, base_dir: Path | None = None) -> ExperimentConfig:
    """Validate ``raw`` for ``command``. Config values beat flags, except the seed flag."""
    if command not in SCHEMAS:
        raise ConfigError(f"no config schema for {command!r}")
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    required, optional = SCHEMAS[command]
    unknown = set(raw) - required - optional - COMMON
    if unknown:
        raise ConfigError(f"unknown config keys for {command}: {sorted(unknown)}")
    missing = required - set(raw)
    if missing:
        raise ConfigError(f"missing config keys for {command}: {sorted(missing)}")

    if seed is None:
        if "seed" not in raw:
            raise ConfigError("a seed is mandatory (config 'seed' or --seed)")
        seed = _int(raw, "seed")
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    cfg = ExperimentConfig(command, seed)
    if "replicas" in raw:
        cfg.replicas = _int(raw, "replicas", 1)
    elif replicas is not None:
        cfg.replicas = replicas
    if "threads" in raw:
        cfg.threads = _int(raw, "threads", 1)
    elif threads is not None:
        cfg.threads = threads

    try:
        for key in ("F", "G", "target"):
            if key in raw:
                setattr(cfg, key, DistributionSpec.from_dict(raw[key]))
        if "sharing" in raw:
            cfg.sharing = SharingSpec.from_dict(raw["sharing"])
    except (DomainError, ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc

    if "model" in raw:
        cfg.model = raw["model"]
        want = "exchange" if command == "exchange" else "division"
        if cfg.model != want:
            raise ConfigError(f"{command} expects model '{want}', got {cfg.model!r}")
    if "n" in raw:
        cfg.n = _int(raw, "n", 2)
    if "steps" in raw:
        cfg.steps = _int(raw, "steps")
    if "snapshots" in raw:
        cfg.snapshots = _int_list(raw, "snapshots")
    if "ns" in raw:
        cfg.ns = _int_list(raw, "ns")
        if not cfg.ns:
            raise ConfigError("'ns' must not be empty")
    if "N" in raw:
        cfg.N = _int(raw, "N", 3)
    if "p" in raw:
        p = raw["p"]
        if isinstance(p, bool) or not isinstance(p, (int, float)) or not 0 < p < 1:
            raise ConfigError("'p' must be a number in (0, 1)")
        cfg.p = float(p)
    if "tests" in raw:
        t = raw["tests"]
        if not isinstance(t, list) or any(x not in TESTS for x in t):
            raise ConfigError(f"'tests' must be a list drawn from {TESTS}")
        cfg.tests = list(t)
    if "input" in raw:
        if not isinstance(raw["input"], str):
            raise ConfigError("'input' must be a path string")
        path = Path(raw["input"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        if not path.is_file():
            raise ConfigError(f"input gap file {path} not found")
        cfg.input = str(path)

    if command in ("shift", "iterate"):
        try:
            check_division_law(cfg.G)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if cfg.input is None and (cfg.F is None or cfg.n is None):
            raise ConfigError(f"{command} needs either 'input' or both 'F' and 'n'")
    if cfg.F is not None:
        if not cfg.F.is_scalar:
            raise ConfigError("F must be a scalar law")
        lo = specfun.support(cfg.F)[0]
        if lo < 0 or (command != "rwre" and cfg.F.kind == "deterministic" and lo <= 0):
            raise ConfigError(f"F = {cfg.F} must be supported on positive reals")
    if command == "iterate" and cfg.n is not None and cfg.input is None and cfg.n <= cfg.steps + 1:
        raise ConfigError("n must exceed steps + 1")
    if command == "exchange" and cfg.n <= 2 * cfg.sharing.max_offset:
        raise ConfigError("torus size n too small for the sharing window")
    if command == "euler" and cfg.replicas < 2:
        raise ConfigError("euler needs at least 2 replicas")
    if command == "rwre":
        if cfg.replicas < 1000:
            raise ConfigError("rwre needs at least 1000 replicas")
        need = 2 * max(cfg.ns) * cfg.sharing.max_offset + 1
        if cfg.N is not None and cfg.N < need:
            raise ConfigError(f"torus N={cfg.N} lets the longest walk wrap; need N >= {need}")
        if cfg.F is not None and not math.isfinite(specfun.variance(cfg.F)):
            raise ConfigError("variance trace needs F with finite variance")
    return cfg


def load_config(command: str, path, **flags) -> ExperimentConfig:
    p = Path(path)
    try:
        raw = json.loads(p.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {p} is not valid JSON: {exc}") from exc
    return build_config(command, raw, base_dir=p.parent, **flags)
