"""Run configuration.

Every tunable lives in one of the section dataclasses below. ``load_config``
reads a JSON file with one object per section; unknown keys and wrong types
raise :class:`ConfigError` naming the offending key path (``graph.theta_order``).
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .errors import ConfigError


@dataclass(frozen=True)
class IngestConfig:
    min_year: int = 1950
    max_year: int = 2100
    min_students: int = 5
    min_attempts: int = 5
    placeholder_patterns: tuple[str, ...] = ("^ZZZ", "^XXX", "^TMP", "^\\?+$")
    malformed_tolerance: float = 0.01


@dataclass(frozen=True)
class GraphConfig:
    theta_order: float = 0.7
    theta_bypass: float = 0.2
    min_common: int = 10
    min_ordered: int = 10
    min_nodes: int = 8
    min_edges: int = 5
    # "period" compares (year, term); "year" ignores terms.
    order_by: str = "period"


@dataclass(frozen=True)
class StructuralConfig:
    normalize_betweenness: bool = True
    bottleneck_fraction: float = 0.1


@dataclass(frozen=True)
class HardshipConfig:
    weights: tuple[float, ...] = (1.0, 1.0, 1.0, 1.0, 1.0)
    # "attempters" or "spell_population"
    dropout_denominator: str = "attempters"
    high_blocking_quantile: float = 0.9
    include_equivalences: bool = True


@dataclass(frozen=True)
class OutcomesConfig:
    window_years: int = 3
    cohort_start: Optional[int] = None
    cohort_end: Optional[int] = None
    fractional_terms: bool = False
    terms_per_year: int = 2


@dataclass(frozen=True)
class PipelineConfig:
    ingest: IngestConfig = field(default_factory=IngestConfig)
    graph: GraphConfig = field(default_factory=GraphConfig)
    structural: StructuralConfig = field(default_factory=StructuralConfig)
    hardship: HardshipConfig = field(default_factory=HardshipConfig)
    outcomes: OutcomesConfig = field(default_factory=OutcomesConfig)
    # units with fewer distinct students are excluded as insufficient_cohort
    min_cohort: int = 10
    degree_names: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return _jsonable(dataclasses.asdict(self))

    def digest(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def replace(self, **sections: Any) -> PipelineConfig:
        return dataclasses.replace(self, **sections)


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _coerce(path: str, value: Any, hint: Any) -> Any:
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if origin in (typing.Union, types.UnionType):
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _coerce(path, value, inner[0])
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected boolean, got {value!r}")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected integer, got {value!r}")
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected number, got {value!r}")
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected string, got {value!r}")
        return value
    if origin is tuple:
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected list, got {value!r}")
        return tuple(_coerce(f"{path}[{i}]", v, args[0]) for i, v in enumerate(value))
    if origin is dict:
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected object, got {value!r}")
        return {str(k): _coerce(f"{path}.{k}", v, args[1]) for k, v in value.items()}
    if dataclasses.is_dataclass(hint):
        return _build(hint, value, path)
    raise ConfigError(f"{path}: unsupported type {hint!r}")  # pragma: no cover


def _build(cls: type, data: Any, prefix: str = "") -> Any:
    if not isinstance(data, dict):
        raise ConfigError(f"{prefix or '<root>'}: expected object, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in names:
            where = f"{prefix}.{key}" if prefix else key
            raise ConfigError(f"{where}: unknown configuration key")
    kwargs = {}
    for name in names & data.keys():
        where = f"{prefix}.{name}" if prefix else name
        kwargs[name] = _coerce(where, data[name], hints[name])
    obj = cls(**kwargs)
    _validate(obj, prefix)
    return obj


def _validate(obj: Any, prefix: str) -> None:
    def fail(key: str, msg: str) -> None:
        where = f"{prefix}.{key}" if prefix else key
        raise ConfigError(f"{where}: {msg}")

    if isinstance(obj, IngestConfig):
        if obj.min_year > obj.max_year:
            fail("min_year", "must not exceed max_year")
        if not 0.0 <= obj.malformed_tolerance <= 1.0:
            fail("malformed_tolerance", "must lie in [0, 1]")
    elif isinstance(obj, GraphConfig):
        if not 0.5 < obj.theta_order <= 1.0:
            fail("theta_order", "must lie in (0.5, 1]")
        if not 0.0 <= obj.theta_bypass < 1.0:
            fail("theta_bypass", "must lie in [0, 1)")
        if obj.order_by not in ("period", "year"):
            fail("order_by", "must be 'period' or 'year'")
        if obj.min_common < 1 or obj.min_ordered < 1:
            fail("min_common", "support minima must be >= 1")
    elif isinstance(obj, HardshipConfig):
        if len(obj.weights) != 5:
            fail("weights", "expected exactly five weights")
        if obj.dropout_denominator not in ("attempters", "spell_population"):
            fail("dropout_denominator", "must be 'attempters' or 'spell_population'")
        if not 0.0 < obj.high_blocking_quantile < 1.0:
            fail("high_blocking_quantile", "must lie in (0, 1)")
    elif isinstance(obj, OutcomesConfig):
        if obj.window_years < 1:
            fail("window_years", "must be >= 1")
        if obj.terms_per_year < 1:
            fail("terms_per_year", "must be >= 1")
    elif isinstance(obj, StructuralConfig):
        if not 0.0 < obj.bottleneck_fraction <= 1.0:
            fail("bottleneck_fraction", "must lie in (0, 1]")


def config_from_dict(data: dict[str, Any]) -> PipelineConfig:
    return _build(PipelineConfig, data)


def load_config(path: str | Path | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"<root>: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    return config_from_dict(data)


def with_overrides(config: PipelineConfig, **flags: Any) -> PipelineConfig:
    """Apply CLI flag overrides (None means "not given")."""
    graph = {k: flags[k] for k in ("theta_order", "theta_bypass", "min_common") if flags.get(k) is not None}
    outcomes = {}
    if flags.get("window_years") is not None:
        outcomes["window_years"] = flags["window_years"]
    data = config.to_dict()
    data["graph"].update(graph)
    data["outcomes"].update(outcomes)
    return config_from_dict(data)
