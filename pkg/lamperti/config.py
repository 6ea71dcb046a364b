"""
config.py
=========
Numerical constants and the run configuration of LampertiLab.

Constants are grouped by the module that consumes them. `RunConfig`
describes one command-line run; it is loaded from a flat JSON document
and/or command-line flags (flags override the file).

Usage:
  from lamperti.config import RunConfig, load_config_file
  cfg = RunConfig.from_mapping(load_config_file("run.json")).validate()
"""

import json
import math
import os
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Mapping, Optional

from lamperti.errors import ParameterError

TOOL_NAME = "lamperti-lab"
TOOL_VERSION = "1.0.0"

# ──────────────────────────────────────────────
# Mathematical constants
# ──────────────────────────────────────────────
EULER_GAMMA = 0.57721566490153286061
E_NEG_GAMMA = math.exp(-EULER_GAMMA)
CRITICAL_D = E_NEG_GAMMA * math.pi ** 2 / 12.0

# ──────────────────────────────────────────────
# series
# ──────────────────────────────────────────────
SERIES_N_MAX = 200
SERIES_EARLY_STOP = 1e-15
SERIES_GROWTH_RUN = 10
PARTITION_CAP = 25
CROSS_CHECK_RTOL = 1e-9
PADE_MAX_ORDER = 12
PADE_COEFF_RTOL = 1e-9
PADE_AGREEMENT_RTOL = 1e-12
# coefficients past the fitted ones that a Pade approximant must reproduce
PADE_CHECK_TERMS = 16
LAMBERT_MAX_ITER = 100

# ──────────────────────────────────────────────
# laws / design
# ──────────────────────────────────────────────
HEAVY_HORIZON = 10 ** 6
LIGHT_HORIZON = 10 ** 3
PGF_TAIL_TOL = 1e-15
PGF_MAX_TERMS = 1 << 22
EXACT_SUM_TERMS = 1 << 16
TRAPEZOID_POINTS = 4097
LIGHT_TAIL_CHECK = 1e-8
CM_TOL = 1e-12
BISECTION_TOL = 1e-14
BISECTION_MAX_ITER = 200
SNAP_TOL = 1e-12
FINITE_SNAP_TOL = 1e-10
ORACLE_TOL = 1e-9
MONOTONE_NOISE = 1e-14
LOG_TAIL_HEAD = 1000

# ──────────────────────────────────────────────
# chain
# ──────────────────────────────────────────────
ROW_SUM_TOL = 1e-10
STATIONARY_RESIDUAL_TOL = 1e-10
POWER_ITERATION_THRESHOLD = 2000
POWER_ITERATION_TOL = 1e-12
POWER_ITERATION_CAP = 100_000
KIRCHHOFF_MAX_N = 12
TP2_TOL = 1e-12
CLASSIFY_K_MIN = 10
CLASSIFY_K_MAX = 40
CLASSIFY_TOL_C = 0.02
CLASSIFY_TOL_D = 0.05
CLASSIFY_SPREAD_D = 0.2
EXPECTED_MAX_RTOL = 1e-12
EXPECTED_MAX_MAX_BLOCK = 62

# ──────────────────────────────────────────────
# hitting
# ──────────────────────────────────────────────
SEP_HORIZON_TOL = 1e-10
HITTING_N_CAP = 10 ** 5
GREEN_KERNEL_TOL = 1e-14
EXP_BOUND_TAIL_TOL = 1e-6
# grid points past the lattice head, and the relative slack on the domination check
EXP_BOUND_GRID = 400
EXP_BOUND_RTOL = 1e-6
SEPARATION_TOL = 1e-10
QSD_TOL = 1e-12
QSD_ITER_CAP = 20_000
MONOTONE_TOL = 1e-12

# ──────────────────────────────────────────────
# montecarlo
# ──────────────────────────────────────────────
GENERATOR_NAME = "numpy.random.Philox (Philox4x64-10) seeded by SeedSequence(seed, spawn_key=(replica,))"
STATE_CAP = 10 ** 9
BATCH_COUNT = 50
MIN_VISITS = 30
LOG_UNDERFLOW = -745.0

# ──────────────────────────────────────────────
# artifacts / cli
# ──────────────────────────────────────────────
CSV_FLOAT_FORMAT = "%.17g"
SCHEMA_VERSION = "lamperti-report/1"
COMMANDS = ("design", "build", "classify", "hitting", "qsd", "simulate", "report")
METHODS = ("series", "bisection", "both")
TRUNCATIONS = {"renorm": "renormalize", "renormalize": "renormalize", "lump": "lump"}
FORMATS = ("csv", "json")
PARAM_KEYS = ("p", "q", "alpha", "beta", "lam", "size", "weights")
# max-norm gap between the recovered stationary vector and the target in `build`
ROUND_TRIP_TOL = 1e-8

# commands that operate on the truncated chain and therefore need N
NEEDS_N = ("build", "hitting", "qsd", "report")


@dataclass(frozen=True)
class RunConfig:
    command: str
    family: Optional[str] = None
    params: Mapping[str, Any] = field(default_factory=dict)
    N: Optional[int] = None
    jmax: int = 20
    method: str = "bisection"
    truncation: str = "renormalize"
    pi0: str = "delta1"
    seed: int = 20240601
    out: str = "output"
    format: str = "csv"
    forced: bool = False
    time_reversed: bool = False
    steps: int = 100_000
    burn_in: int = 1_000
    replicas: int = 1
    n_max: Optional[int] = None

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "RunConfig":
        known = {f for f in cls.__dataclass_fields__}
        params = dict(data.get("params", {}))
        kwargs = {}
        for key, value in data.items():
            if key in PARAM_KEYS:
                params[key] = value
            elif key in known and key != "params":
                kwargs[key] = value
            elif key != "params":
                raise ParameterError(f"unknown configuration key: {key!r}")
        if "truncation" in kwargs:
            kwargs["truncation"] = TRUNCATIONS.get(kwargs["truncation"], kwargs["truncation"])
        return cls(params=params, **kwargs)

    def merged(self, overrides: Mapping[str, Any]) -> "RunConfig":
        """Return a copy where every non-None override replaces the stored value."""
        params = dict(self.params)
        changes = {}
        for key, value in overrides.items():
            if value is None:
                continue
            if key in PARAM_KEYS:
                params[key] = value
            elif key == "truncation":
                changes[key] = TRUNCATIONS.get(value, value)
            else:
                changes[key] = value
        return replace(self, params=params, **changes)

    def validate(self) -> "RunConfig":
        if self.command not in COMMANDS:
            raise ParameterError(f"unknown command {self.command!r}; expected one of {COMMANDS}")
        if not self.family:
            raise ParameterError(f"command {self.command!r} requires --family")
        if self.command in NEEDS_N and self.N is None:
            raise ParameterError(f"command {self.command!r} requires --N")
        if self.N is not None and int(self.N) < 1:
            raise ParameterError(f"N must be >= 1, got {self.N}")
        if self.method not in METHODS:
            raise ParameterError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.truncation not in TRUNCATIONS.values():
            raise ParameterError(f"truncation must be renorm or lump, got {self.truncation!r}")
        if self.format not in FORMATS:
            raise ParameterError(f"format must be one of {FORMATS}, got {self.format!r}")
        if self.jmax < 1:
            raise ParameterError(f"jmax must be >= 1, got {self.jmax}")
        if not self.steps > self.burn_in >= 0:
            raise ParameterError("simulation needs steps > burn_in >= 0")
        if self.replicas < 1:
            raise ParameterError("replicas must be >= 1")
        if not (0 <= int(self.seed) < 2 ** 64):
            raise ParameterError("seed must be a 64-bit unsigned integer")
        return self

    def to_dict(self) -> dict:
        data = asdict(self)
        data["params"] = dict(sorted(dict(self.params).items()))
        return dict(sorted(data.items()))


def load_config_file(path: str) -> dict:
    """Read a flat JSON configuration document."""
    if not os.path.exists(path):
        raise ParameterError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParameterError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ParameterError(f"config file {path} must hold a JSON object")
    return data


def resolve_config(flags: Mapping[str, Any], file_data: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """Merge a config file with command-line flags; flags win."""
    base = dict(file_data or {})
    if flags.get("command") is not None:
        base["command"] = flags["command"]
    if "command" not in base:
        raise ParameterError("no command given")
    cfg = RunConfig.from_mapping(base)
    overrides = {k: v for k, v in flags.items() if k != "command"}
    return cfg.merged(overrides).validate()
