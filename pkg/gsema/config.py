"""Run configuration: const defaults, .env, optional YAML file and cli flags, validated with voluptuous."""
from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import voluptuous as vol
import yaml
from dotenv import find_dotenv, load_dotenv

from .const import (
    DEFAULT_ACTIVITY_THRESHOLD,
    DEFAULT_ALPHA,
    DEFAULT_GSVA_BANDWIDTH_FACTOR,
    DEFAULT_GSVA_KERNEL,
    DEFAULT_MIN_SET_SIZE,
    DEFAULT_MODEL,
    DEFAULT_POISSON_OFFSET,
    DEFAULT_SEED,
    DEFAULT_SSE_METHOD,
    DEFAULT_SSGSEA_ALPHA,
    DEFAULT_THREADS,
    KERNEL_GAUSSIAN,
    KERNEL_POISSON,
    MODEL_FEM,
    MODEL_REM,
    SSE_METHODS,
    STANDARDIZE_MATRIX,
    STANDARDIZE_ROW,
)
from .errors import ConfigError

POSITIVE = vol.All(vol.Coerce(float), vol.Range(min=0, min_included=False))

SSE_SCHEMA = vol.Schema(
    {
        vol.Required("method", default=DEFAULT_SSE_METHOD): vol.All(vol.Lower, vol.In(SSE_METHODS)),
        vol.Required("ssgsea_weight_exponent", default=DEFAULT_SSGSEA_ALPHA): POSITIVE,
        vol.Required("ssgsea_normalize", default=False): vol.Boolean(),
        vol.Required("gsva_kernel", default=DEFAULT_GSVA_KERNEL): vol.All(
            vol.Lower, vol.In([KERNEL_GAUSSIAN, KERNEL_POISSON])
        ),
        vol.Required("gsva_bandwidth_factor", default=DEFAULT_GSVA_BANDWIDTH_FACTOR): POSITIVE,
        vol.Required("gsva_max_diff", default=True): vol.Boolean(),
        vol.Required("poisson_offset", default=DEFAULT_POISSON_OFFSET): POSITIVE,
        vol.Required("singscore_directed", default=True): vol.Boolean(),
        vol.Required("min_set_size", default=DEFAULT_MIN_SET_SIZE): vol.All(vol.Coerce(int), vol.Range(min=1)),
        vol.Required("max_set_size", default=None): vol.Any(None, vol.All(vol.Coerce(int), vol.Range(min=1))),
    }
)

FILTER_SCHEMA = vol.Schema(
    {
        vol.Required("activity_threshold", default=DEFAULT_ACTIVITY_THRESHOLD): vol.All(
            vol.Coerce(float), vol.Range(min=0)
        ),
        vol.Required("min_studies", default=None): vol.Any(None, vol.All(vol.Coerce(int), vol.Range(min=1))),
        vol.Required("standardize", default=True): vol.Boolean(),
        vol.Required("skip_standardization_for_zscore", default=True): vol.Boolean(),
        vol.Required("standardize_mode", default=STANDARDIZE_ROW): vol.All(
            vol.Lower, vol.In([STANDARDIZE_ROW, STANDARDIZE_MATRIX])
        ),
    }
)

EFFECTS_SCHEMA = vol.Schema(
    {
        vol.Required("ordinary_t", default=False): vol.Boolean(),
        vol.Required("design_df", default=False): vol.Boolean(),
    }
)

META_SCHEMA = vol.Schema(
    {
        vol.Required("model", default=DEFAULT_MODEL): vol.All(vol.Lower, vol.In([MODEL_FEM, MODEL_REM])),
        vol.Required("alpha", default=DEFAULT_ALPHA): vol.All(
            vol.Coerce(float), vol.Range(min=0, max=1, min_included=False, max_included=False)
        ),
    }
)


def _threads(value: Any) -> int:
    if isinstance(value, str) and value.strip().lower() == "auto":
        return os.cpu_count() or 1
    return int(value)


RUN_SCHEMA = vol.Schema(
    {
        vol.Required("seed", default=DEFAULT_SEED): vol.All(vol.Coerce(int), vol.Range(min=0, max=2**64 - 1)),
        vol.Required("threads", default=DEFAULT_THREADS): vol.All(_threads, vol.Range(min=1)),
    },
    extra=vol.ALLOW_EXTRA,
)

# env var -> (section, key)
ENV_KEYS = {
    "GSEMA_SSE_METHOD": ("sse", "method"),
    "GSEMA_MIN_SET_SIZE": ("sse", "min_set_size"),
    "GSEMA_FILTER_THRESHOLD": ("filter", "activity_threshold"),
    "GSEMA_MIN_STUDIES": ("filter", "min_studies"),
    "GSEMA_MODEL": ("meta", "model"),
    "GSEMA_ALPHA": ("meta", "alpha"),
    "GSEMA_THREADS": ("run", "threads"),
    "GSEMA_SEED": ("run", "seed"),
}

SECTIONS = ("sse", "filter", "effects", "meta", "run")


def _validate(schema: vol.Schema, data: dict[str, Any], section: str) -> dict[str, Any]:
    try:
        return schema(data)
    except vol.Invalid as e:
        raise ConfigError(f"invalid {section} setting: {e}") from e


@dataclass(frozen=True)
class SseConfig:
    method: str = DEFAULT_SSE_METHOD
    ssgsea_weight_exponent: float = DEFAULT_SSGSEA_ALPHA
    ssgsea_normalize: bool = False
    gsva_kernel: str = DEFAULT_GSVA_KERNEL
    gsva_bandwidth_factor: float = DEFAULT_GSVA_BANDWIDTH_FACTOR
    gsva_max_diff: bool = True
    poisson_offset: float = DEFAULT_POISSON_OFFSET
    singscore_directed: bool = True
    min_set_size: int = DEFAULT_MIN_SET_SIZE
    max_set_size: int | None = None

    def __post_init__(self) -> None:
        checked = _validate(SSE_SCHEMA, asdict(self), "sse")
        for key, value in checked.items():
            object.__setattr__(self, key, value)


@dataclass(frozen=True)
class FilterConfig:
    activity_threshold: float = DEFAULT_ACTIVITY_THRESHOLD
    min_studies: int | None = None
    standardize: bool = True
    skip_standardization_for_zscore: bool = True
    standardize_mode: str = STANDARDIZE_ROW

    def __post_init__(self) -> None:
        checked = _validate(FILTER_SCHEMA, asdict(self), "filter")
        for key, value in checked.items():
            object.__setattr__(self, key, value)

    def required_studies(self, k: int) -> int:
        if self.min_studies is None:
            return k
        if self.min_studies > k:
            raise ConfigError(f"min_studies={self.min_studies} exceeds the {k} studies available")
        return self.min_studies


@dataclass(frozen=True)
class EffectsConfig:
    ordinary_t: bool = False
    design_df: bool = False

    def __post_init__(self) -> None:
        checked = _validate(EFFECTS_SCHEMA, asdict(self), "effects")
        for key, value in checked.items():
            object.__setattr__(self, key, value)


@dataclass(frozen=True)
class MetaConfig:
    model: str = DEFAULT_MODEL
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self) -> None:
        checked = _validate(META_SCHEMA, asdict(self), "meta")
        for key, value in checked.items():
            object.__setattr__(self, key, value)


@dataclass(frozen=True)
class PipelineConfig:
    sse: SseConfig = field(default_factory=SseConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    effects: EffectsConfig = field(default_factory=EffectsConfig)
    meta: MetaConfig = field(default_factory=MetaConfig)

    def as_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class RunConfig:
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    manifest: Path | None = None
    gmt: Path | None = None
    output_dir: Path = Path("gsema_out")
    config_path: Path | None = None
    seed: int = DEFAULT_SEED
    threads: int = DEFAULT_THREADS
    scores_out: Path | None = None

    def as_dict(self) -> dict[str, Any]:
        data = asdict(self)
        for key in ("manifest", "gmt", "output_dir", "config_path", "scores_out"):
            if data[key] is not None:
                data[key] = str(data[key])
        return data


def env_settings() -> dict[str, dict[str, Any]]:
    load_dotenv(find_dotenv(usecwd=True))
    settings: dict[str, dict[str, Any]] = {s: {} for s in SECTIONS}
    for name, (section, key) in ENV_KEYS.items():
        value = os.getenv(name)
        if value not in (None, ""):
            settings[section][key] = value
    return settings


def load_yaml(path: str | Path) -> dict[str, dict[str, Any]]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a mapping")

    settings: dict[str, dict[str, Any]] = {s: {} for s in SECTIONS}
    for key, value in data.items():
        if key in SECTIONS and key != "run":
            if not isinstance(value, dict):
                raise ConfigError(f"section {key!r} in {path} must be a mapping")
            settings[key].update(value)
        else:
            settings["run"][key] = value
    return settings


def merge_settings(*layers: dict[str, dict[str, Any]]) -> dict[str, dict[str, Any]]:
    """Later layers win; ``None`` values never override."""
    merged: dict[str, dict[str, Any]] = {s: {} for s in SECTIONS}
    for layer in layers:
        for section, values in layer.items():
            for key, value in values.items():
                if value is not None:
                    merged.setdefault(section, {})[key] = value
    return merged


def build_pipeline_config(settings: dict[str, dict[str, Any]]) -> PipelineConfig:
    sections = {}
    for name, schema, cls in (
        ("sse", SSE_SCHEMA, SseConfig),
        ("filter", FILTER_SCHEMA, FilterConfig),
        ("effects", EFFECTS_SCHEMA, EffectsConfig),
        ("meta", META_SCHEMA, MetaConfig),
    ):
        values = settings.get(name, {})
        unknown = set(values) - {str(k) for k in schema.schema}
        if unknown:
            raise ConfigError(f"unknown {name} settings: {', '.join(sorted(unknown))}")
        sections[name] = cls(**_validate(schema, dict(values), name))
    return PipelineConfig(**sections)


def build_run_config(cli: dict[str, dict[str, Any]], config_path: str | Path | None = None) -> RunConfig:
    layers = [env_settings()]
    if config_path is not None:
        layers.append(load_yaml(config_path))
    layers.append(cli)
    settings = merge_settings(*layers)

    pipeline = build_pipeline_config(settings)
    run = _validate(RUN_SCHEMA, dict(settings.get("run", {})), "run")

    def _path(key: str) -> Path | None:
        value = run.get(key)
        return Path(value) if value not in (None, "") else None

    return RunConfig(
        pipeline=pipeline,
        manifest=_path("manifest"),
        gmt=_path("gmt"),
        output_dir=_path("output_dir") or Path("gsema_out"),
        config_path=Path(config_path) if config_path is not None else None,
        seed=run["seed"],
        threads=run["threads"],
        scores_out=_path("scores_out"),
    )
