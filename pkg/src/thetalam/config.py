"""Run configuration: a key=value text format with validation.

    # comments and blank lines are ignored
    metric = poincare
    grid_n = 256
    delta_exhaustion = 0.01
    target_set = 0.25,[0.6:0.7]
    n_list = 4,8,16,32
    tol_EL = 1e-8
    tau = 0.1
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional

from .geom import MetricProfile
from .lam_sim import TargetSet
from .rotmin import EPS_AREA

DEFAULT_DELTA = 0.01
GRID_RANGE = (32, 2048)


class ConfigParseError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ConfigValidationError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class Tolerances:
    tol_EL: float = 1e-8
    tol_area: float = EPS_AREA
    tau: float = 0.1


@dataclass(frozen=True)
class RunConfig:
    metric: str = "euclidean"
    grid_n: int = 256
    delta_exhaustion: Optional[float] = None
    target_set: str = ""
    n_list: tuple = (4, 8, 16, 32)
    tolerances: Tolerances = field(default_factory=Tolerances)

    @property
    def radius(self) -> float:
        return 1.0 - self.delta_exhaustion if self.metric == "poincare" else 1.0

    def target(self) -> TargetSet:
        return TargetSet.parse(self.target_set)

    def metric_profile(self) -> MetricProfile:
        return MetricProfile(self.metric)

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["n_list"] = list(self.n_list)
        return d

    def digest(self) -> str:
        """Hash of the canonical JSON form (first 16 hex digits of sha256)."""
        text = json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def validated(self) -> "RunConfig":
        if self.metric not in ("euclidean", "poincare"):
            raise ConfigValidationError("metric", f"must be euclidean or poincare, got {self.metric!r}")
        if isinstance(self.grid_n, bool) or not isinstance(self.grid_n, int):
            raise ConfigValidationError("grid_n", "must be an integer")
        lo, hi = GRID_RANGE
        if not lo <= self.grid_n <= hi:
            raise ConfigValidationError("grid_n", f"must lie in [{lo}, {hi}], got {self.grid_n}")
        delta = self.delta_exhaustion
        if self.metric == "poincare":
            delta = DEFAULT_DELTA if delta is None else delta
            if not 0.0 < delta <= 0.2:
                raise ConfigValidationError("delta_exhaustion", f"must lie in (0, 0.2], got {delta}")
        elif delta is not None:
            raise ConfigValidationError("delta_exhaustion", "applies to metric=poincare only")
        try:
            TargetSet.parse(self.target_set)
        except ValueError as exc:
            raise ConfigValidationError("target_set", str(exc)) from None
        ns = tuple(self.n_list)
        if not ns or any(n < 1 for n in ns) or any(b <= a for a, b in zip(ns, ns[1:])):
            raise ConfigValidationError("n_list", "must be a nonempty increasing list of positive integers")
        for name in ("tol_EL", "tol_area", "tau"):
            v = getattr(self.tolerances, name)
            if not v > 0:
                raise ConfigValidationError(name, f"must be positive, got {v}")
        if self.tolerances.tau >= 1:
            raise ConfigValidationError("tau", f"must be below 1, got {self.tolerances.tau}")
        return dataclasses.replace(self, delta_exhaustion=delta, n_list=ns)


def _int(v):
    return int(v, 10)


def _ints(v):
    return tuple(int(x, 10) for x in v.replace(" ", "").split(",") if x)


_KEYS = {
    "metric": ("metric", str.lower),
    "grid_n": ("grid_n", _int),
    "delta_exhaustion": ("delta_exhaustion", float),
    "target_set": ("target_set", str),
    "n_list": ("n_list", _ints),
    "tol_el": ("tol_EL", float),
    "tol_area": ("tol_area", float),
    "tau": ("tau", float),
}


def parse_config(text: str) -> RunConfig:
    """Parse and validate a configuration document."""
    top, tols, seen = {}, {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigParseError(lineno, f"expected key = value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        k = key.lower()
        if k not in _KEYS:
            raise ConfigParseError(lineno, f"unknown key {key!r}")
        if k in seen:
            raise ConfigParseError(lineno, f"duplicate key {key!r} (first set on line {seen[k]})")
        seen[k] = lineno
        name, conv = _KEYS[k]
        try:
            val = conv(value)
        except ValueError:
            raise ConfigParseError(lineno, f"bad value for {key}: {value!r}") from None
        (tols if name in ("tol_EL", "tol_area", "tau") else top)[name] = val
    return RunConfig(**top, tolerances=Tolerances(**tols)).validated()


def render_config(cfg: RunConfig) -> str:
    """Inverse of parse_config for a validated config."""
    t = cfg.tolerances
    lines = [
        f"metric = {cfg.metric}",
        f"grid_n = {cfg.grid_n}",
    ]
    if cfg.delta_exhaustion is not None:
        lines.append(f"delta_exhaustion = {cfg.delta_exhaustion!r}")
    lines += [
        f"target_set = {cfg.target_set}",
        "n_list = " + ",".join(str(n) for n in cfg.n_list),
        f"tol_EL = {t.tol_EL!r}",
        f"tol_area = {t.tol_area!r}",
        f"tau = {t.tau!r}",
    ]
    return "\n".join(lines) + "\n"
