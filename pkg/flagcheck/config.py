"""Configuration: capacity limits, solver settings and batch run configuration."""

import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import ArgumentError, FormatError
from .types import MEASURE_IDS, PROPERTIES

# Closed-form measures get the tight tolerance, c_tr is solver-limited
DEFAULT_TOLERANCES: dict[str, float] = {
    "c_l1": 1e-9,
    "c_rel_ent": 1e-9,
    "c_tr": 1e-6,
    "negativity": 1e-9,
    "eof_2q": 1e-9,
}

THREADS_ENV = "FLAGCHECK_THREADS"


@dataclass(frozen=True)
class Limits:
    """Capacity limits for dense storage."""

    dim_cap: int = 4096
    copy_cap: int = 12


DEFAULT_LIMITS = Limits()


@dataclass(frozen=True)
class SolverConfig:
    """Settings for the trace-norm-of-coherence minimizer; max_iter caps Newton steps."""

    tol: float = 1e-7
    max_iter: int = 400
    restarts: int = 2
    seed: int = 0
    retries: int = 2


DEFAULT_SOLVER = SolverConfig()


def thread_count(default: int = 1) -> int:
    """Worker thread cap from FLAGCHECK_THREADS (minimum 1)."""
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return default
    try:
        return max(1, int(raw))
    except ValueError:
        return default


@dataclass
class RunConfig:
    """Configuration for one batch run (check, search or regularize)."""

    command: str = "check"
    master_seed: int = 0
    tolerances: dict[str, float] = field(default_factory=dict)
    trials: int = 100
    dims: list[int] = field(default_factory=lambda: [2])
    measures: list[str] = field(default_factory=list)
    properties: list[str] = field(default_factory=list)
    budget: int = 10000
    output_path: str | None = None
    format: str = "json"
    nmax: int = 4
    n_kraus_max: int = 6
    ensemble_max: int = 4
    p1: float = 0.3
    delta_typ: float = 0.3
    sandwich: bool = False
    record_timing: bool = False
    witness_path: str | None = None
    state_path: str | None = None

    def tol_for(self, measure_id: str) -> float:
        """Verdict tolerance for a measure, honouring per-measure overrides."""
        if measure_id in self.tolerances:
            return self.tolerances[measure_id]
        return DEFAULT_TOLERANCES.get(measure_id, 1e-9)

    def validate(self, limits: Limits = DEFAULT_LIMITS) -> None:
        """
        Check the run configuration invariants.

        Raises:
            ArgumentError: On trials < 1, empty or unknown measures/properties,
                dims outside the cap, or an unknown output format
        """
        if self.command not in ("check", "search", "regularize"):
            raise ArgumentError(f"Unknown command: {self.command}")
        if self.trials < 1:
            raise ArgumentError(f"trials must be >= 1, got {self.trials}")
        if not self.measures:
            raise ArgumentError("At least one measure is required")
        unknown = [m for m in self.measures if m not in MEASURE_IDS]
        if unknown:
            raise ArgumentError(f"Unknown measure id(s): {', '.join(unknown)}")
        bad_props = [p for p in self.properties if p not in PROPERTIES]
        if bad_props:
            raise ArgumentError(f"Unknown property: {', '.join(bad_props)}")
        if self.command != "regularize" and not self.properties:
            raise ArgumentError("At least one property is required")
        if not self.dims:
            raise ArgumentError("At least one dimension is required")
        for d in self.dims:
            if d < 1 or d > limits.dim_cap:
                raise ArgumentError(f"Dimension {d} outside [1, {limits.dim_cap}]")
        if self.format not in ("json", "csv"):
            raise ArgumentError(f"Unknown format: {self.format}")
        if self.budget < 1:
            raise ArgumentError(f"budget must be >= 1, got {self.budget}")
        if self.nmax < 1 or self.nmax > limits.copy_cap:
            raise ArgumentError(f"nmax must be in [1, {limits.copy_cap}], got {self.nmax}")
        if not 0.0 < self.p1 <= 0.5:
            raise ArgumentError(f"p1 must be in (0, 1/2], got {self.p1}")
        if self.delta_typ < 0:
            raise ArgumentError(f"delta_typ must be >= 0, got {self.delta_typ}")
        if self.n_kraus_max < 1 or self.ensemble_max < 1:
            raise ArgumentError("kraus_max and ensemble_max must be >= 1")

    def echo(self) -> dict:
        """Deterministic dict form embedded in reports."""
        data = asdict(self)
        data["tolerances"] = {k: self.tolerances[k] for k in sorted(self.tolerances)}
        return data


def _parse_list(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _parse_int_list(value: str) -> list[int]:
    return [int(v) for v in _parse_list(value)]


def _parse_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value}")


def parse_tolerances(value: str) -> dict[str, float]:
    """
    Parse a tolerance spec.

    A bare number applies to every measure; otherwise `id:tol` pairs
    separated by commas (e.g. `c_tr:1e-6,c_l1:1e-9`).
    """
    value = value.strip()
    if ":" not in value:
        tol = float(value)
        return {m: tol for m in MEASURE_IDS}
    result = {}
    for item in _parse_list(value):
        key, _, tol = item.partition(":")
        result[key.strip()] = float(tol)
    return result


# key in file -> (RunConfig attribute, parser)
_CONFIG_KEYS = {
    "command": ("command", str),
    "measure": ("measures", _parse_list),
    "property": ("properties", _parse_list),
    "dim": ("dims", _parse_int_list),
    "trials": ("trials", int),
    "seed": ("master_seed", int),
    "tol": ("tolerances", parse_tolerances),
    "budget": ("budget", int),
    "nmax": ("nmax", int),
    "out": ("output_path", str),
    "format": ("format", str),
    "kraus_max": ("n_kraus_max", int),
    "ensemble_max": ("ensemble_max", int),
    "p1": ("p1", float),
    "delta_typ": ("delta_typ", float),
    "sandwich": ("sandwich", _parse_bool),
    "timing": ("record_timing", _parse_bool),
    "witness": ("witness_path", str),
    "state": ("state_path", str),
}


def parse_run_config(text: str, base: RunConfig | None = None) -> RunConfig:
    """
    Parse flat `key = value` text into a RunConfig.

    Args:
        text: Config file contents; `#` starts a comment
        base: Config to update (a fresh default RunConfig if None)

    Returns:
        The updated RunConfig

    Raises:
        FormatError: On malformed lines, unknown keys or unparsable values
    """
    config = base if base is not None else RunConfig()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if key not in _CONFIG_KEYS:
            raise FormatError(f"line {lineno}: unknown key {key!r}")
        attr, parser = _CONFIG_KEYS[key]
        try:
            setattr(config, attr, parser(value.strip()))
        except ValueError as e:
            raise FormatError(f"line {lineno}: bad value for {key}: {e}")
    return config


def load_run_config(path: str, base: RunConfig | None = None) -> RunConfig:
    """Load a flat key=value config file."""
    file_path = Path(path)
    if not file_path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")
    return parse_run_config(file_path.read_text(encoding="utf-8"), base)


def apply_settings(config: RunConfig, settings: dict[str, str]) -> RunConfig:
    """
    Set config fields from raw string values keyed like the config file.

    Raises:
        FormatError: On unknown keys or unparsable values
    """
    for key, value in settings.items():
        key = key.replace("-", "_")
        if key not in _CONFIG_KEYS:
            raise FormatError(f"unknown key {key!r}")
        attr, parser = _CONFIG_KEYS[key]
        try:
            setattr(config, attr, parser(str(value).strip()))
        except ValueError as e:
            raise FormatError(f"bad value for {key}: {e}")
    return config
