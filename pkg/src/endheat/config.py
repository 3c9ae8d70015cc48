"""Scenario configuration: flat ``key = value`` text with dotted keys.

Example::

    scenario = rn_sum_3
    end.1.kind = powerlog
    end.1.alpha = 3
    end.2.kind = powerlog
    end.2.alpha = 3
    mesh.r_max = 4000
    mesh.nodes_per_decade = 64
    grid.t.min = 100
    grid.t.max = 1e6
    grid.t.per_decade = 4
    tasks = p_oo, bottleneck
    band.p_oo.max_spread = 10

``#`` at the start of a line, or after whitespace, starts a comment.  Later
keys override earlier ones.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .volume_models import (
    EuclideanPlaneProfile,
    ManifoldSpec,
    OscillatingProfile,
    ParabolicWeightProfile,
    PowerLogProfile,
    ScheduleMode,
    VolumeProfile,
    build_schedule,
)

TASKS = ("p_oo", "offdiag", "bottleneck", "poincare", "liouville", "schedule", "osc_gap")
END_KINDS = ("powerlog", "m1", "m3", "oscillating")
_KEY = re.compile(r"^[A-Za-z0-9_.]+$")
_COMMENT = re.compile(r"(^|\s)#.*$")


def parse_text(text: str) -> dict:
    """Raw ``{key: value-string}`` mapping from config text."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _COMMENT.sub("", raw).strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not _KEY.match(key):
            raise ConfigError(f"line {lineno}", f"bad key {key!r}")
        out[key] = value
    return out


def parse_overrides(items) -> dict:
    """``["k=v", ...]`` from the command line."""
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(item, "override must look like key=value")
        k, v = (s.strip() for s in item.split("=", 1))
        out[k] = v
    return out


def _float(raw: dict, key: str, default=None) -> float:
    if key not in raw:
        if default is None:
            raise ConfigError(key, "missing")
        return default
    try:
        val = float(raw[key])
    except ValueError:
        raise ConfigError(key, f"not a number: {raw[key]!r}") from None
    if not math.isfinite(val):
        raise ConfigError(key, "must be finite")
    return val


def _int(raw: dict, key: str, default=None) -> int:
    val = _float(raw, key, default)
    if val != int(val):
        raise ConfigError(key, f"not an integer: {raw[key]!r}")
    return int(val)


def _bool(raw: dict, key: str, default: bool) -> bool:
    if key not in raw:
        return default
    v = raw[key].lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(key, f"not a boolean: {raw[key]!r}")


def _list(raw: dict, key: str) -> list:
    if key not in raw or not raw[key].strip():
        return []
    return [s.strip() for s in raw[key].split(",") if s.strip()]


@dataclass(frozen=True)
class GeometricGrid:
    lo: float
    hi: float
    per_decade: int

    def values(self) -> np.ndarray:
        n = max(int(round(math.log10(self.hi / self.lo) * self.per_decade)), 1) + 1
        out = np.geomspace(self.lo, self.hi, n)
        out[0], out[-1] = self.lo, self.hi
        return out


def _grid(raw: dict, prefix: str, required: bool) -> GeometricGrid | None:
    keys = [f"{prefix}.min", f"{prefix}.max"]
    if not any(k in raw for k in keys):
        if required:
            raise ConfigError(prefix, "grid is required by the selected tasks")
        return None
    lo, hi = _float(raw, keys[0]), _float(raw, keys[1])
    per = _int(raw, f"{prefix}.per_decade", 4)
    if not 0 < lo < hi:
        raise ConfigError(prefix, f"need 0 < min < max, got [{lo:g}, {hi:g}]")
    if per < 1:
        raise ConfigError(f"{prefix}.per_decade", "must be >= 1")
    return GeometricGrid(lo, hi, per)


def build_profile(params: dict, path: str) -> VolumeProfile:
    """Profile from the ``end.<i>.*`` parameters (keys without the prefix)."""
    kind = params.get("kind")
    if kind not in END_KINDS:
        raise ConfigError(f"{path}.kind", f"must be one of {', '.join(END_KINDS)}")
    p = {f"{path}.{k}": v for k, v in params.items()}
    try:
        if kind == "powerlog":
            return PowerLogProfile(_float(p, f"{path}.alpha"), _float(p, f"{path}.beta", 0.0), _float(p, f"{path}.scale", 1.0))
        if kind == "m1":
            return EuclideanPlaneProfile()
        if kind == "m3":
            return ParabolicWeightProfile()
        mode = params.get("mode", "example1")
        if mode not in {m.value for m in ScheduleMode}:
            raise ConfigError(f"{path}.mode", "must be example1 or example2")
        delta = _float(p, f"{path}.delta") if f"{path}.delta" in p else None
        sched = build_schedule(
            _float(p, f"{path}.alpha", 4.0),
            _float(p, f"{path}.beta", 1.0),
            N=_int(p, f"{path}.N", 8),
            mode=mode,
            delta=delta,
            log_a1=_float(p, f"{path}.log_a1", 8.0),
            plateau=math.exp(_float(p, f"{path}.log_plateau", 0.0)),
        )
        return OscillatingProfile(sched)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None


@dataclass
class ScenarioConfig:
    """Validated scenario description.

    ``log_r_max`` is always set; ``r_max = auto`` derives it from an
    oscillating end's schedule (four times ``a_{periods}``).
    """

    scenario: str
    ends: list
    spec: ManifoldSpec
    log_r_max: float
    nodes_per_decade: int
    r_min: float
    t_grid: GeometricGrid | None
    r_grid: GeometricGrid | None
    tasks: list
    bands: dict
    output_dir: str
    fraction: float
    raw: dict = field(repr=False)

    @property
    def r_max(self) -> float:
        return math.exp(self.log_r_max)

    def get(self, key: str, default=None):
        return self.raw.get(key, default)

    def get_float(self, key: str, default=None) -> float:
        return _float(self.raw, key, default)

    def get_int(self, key: str, default=None) -> int:
        return _int(self.raw, key, default)

    def get_bool(self, key: str, default: bool) -> bool:
        return _bool(self.raw, key, default)

    def get_list(self, key: str) -> list:
        return _list(self.raw, key)

    def oscillating_end(self) -> int | None:
        for i, prof in enumerate(self.spec.profiles):
            if isinstance(prof, OscillatingProfile):
                return i
        return None


def _ends(raw: dict) -> list:
    idx = sorted({int(m.group(1)) for k in raw if (m := re.match(r"^end\.(\d+)\.", k))})
    if not idx:
        raise ConfigError("end", "at least one end.<i>.kind is required")
    if idx != list(range(1, len(idx) + 1)):
        raise ConfigError("end", f"ends must be numbered 1..k, got {idx}")
    ends = []
    for i in idx:
        pre = f"end.{i}."
        ends.append({k[len(pre):]: v for k, v in raw.items() if k.startswith(pre)})
    return ends


def config_from_mapping(raw: dict) -> ScenarioConfig:
    """Validate a raw mapping (all values as strings)."""
    raw = {k: str(v) for k, v in raw.items()}
    scenario = raw.get("scenario", "custom")
    ends = _ends(raw)
    labels = [e.get("label", f"E{i + 1}") for i, e in enumerate(ends)]
    profiles = [build_profile(e, f"end.{i + 1}") for i, e in enumerate(ends)]
    try:
        spec = ManifoldSpec.of(*profiles, labels=labels)
    except ValueError as exc:
        raise ConfigError("end", str(exc)) from None

    tasks = _list(raw, "tasks")
    if not tasks:
        raise ConfigError("tasks", "no tasks selected")
    for t in tasks:
        if t not in TASKS:
            raise ConfigError("tasks", f"unknown task {t!r}; choose from {', '.join(TASKS)}")

    r_min = _float(raw, "mesh.r_min", 1.0)
    if r_min <= 0:
        raise ConfigError("mesh.r_min", "must be positive")
    npd = _int(raw, "mesh.nodes_per_decade", 64)
    if npd < 16:
        raise ConfigError("mesh.nodes_per_decade", "must be >= 16")
    rm = raw.get("mesh.r_max", "")
    if rm == "auto":
        osc = [p for p in profiles if isinstance(p, OscillatingProfile)]
        if not osc:
            raise ConfigError("mesh.r_max", "auto needs an oscillating end")
        periods = _int(raw, "grid.t.periods", 4)
        la = osc[0].schedule.log_a()
        if not 1 <= periods <= len(la):
            raise ConfigError("grid.t.periods", f"must lie in [1, {len(la)}]")
        log_r_max = float(la[periods - 1]) + math.log(4.0)
    elif "mesh.log_r_max" in raw:
        log_r_max = _float(raw, "mesh.log_r_max")
    else:
        log_r_max = math.log(_float(raw, "mesh.r_max", 1e4))
    if log_r_max < math.log(10.0):
        raise ConfigError("mesh.r_max", "must be >= 10")

    needs_t = any(t in tasks for t in ("p_oo", "offdiag", "bottleneck"))
    t_grid = _grid(raw, "grid.t", needs_t)
    if t_grid is not None and math.log(t_grid.hi) > 2.0 * (log_r_max - math.log(4.0)) + 1e-9:
        raise ConfigError("grid.t.max", "t must satisfy t <= (r_max/4)^2")
    r_grid = _grid(raw, "grid.r", "poincare" in tasks)
    r_limit = math.log(_float(raw, "poincare.r_max")) if "poincare.r_max" in raw else log_r_max
    if r_grid is not None and math.log(r_grid.hi) > r_limit + 1e-9:
        raise ConfigError("grid.r.max", "must not exceed the mesh radius")
    if "osc_gap" in tasks and not any(isinstance(p, OscillatingProfile) for p in profiles):
        raise ConfigError("tasks", "osc_gap needs an oscillating end")
    if "schedule" in tasks and not any(isinstance(p, OscillatingProfile) for p in profiles):
        raise ConfigError("tasks", "schedule needs an oscillating end")

    bands = {}
    for k, v in raw.items():
        m = re.match(r"^band\.([A-Za-z0-9_]+)\.max_spread$", k)
        if m:
            val = _float(raw, k)
            if val < 1:
                raise ConfigError(k, "spread bound must be >= 1")
            bands[m.group(1)] = val
    fraction = _float(raw, "solver.fraction", 0.02)
    if not 0 < fraction <= 0.5:
        raise ConfigError("solver.fraction", "must lie in (0, 0.5]")
    return ScenarioConfig(
        scenario=scenario,
        ends=ends,
        spec=spec,
        log_r_max=log_r_max,
        nodes_per_decade=npd,
        r_min=r_min,
        t_grid=t_grid,
        r_grid=r_grid,
        tasks=tasks,
        bands=bands,
        output_dir=raw.get("output.dir", "endheat_out"),
        fraction=fraction,
        raw=raw,
    )


def parse_config(text: str, overrides: dict | None = None) -> ScenarioConfig:
    raw = parse_text(text)
    raw.update(overrides or {})
    return config_from_mapping(raw)


def load_config(path, overrides: dict | None = None) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read: {exc.strerror}") from None
    return parse_config(text, overrides)


def dump_config(raw: dict) -> str:
    return "".join(f"{k} = {v}\n" for k, v in raw.items())
