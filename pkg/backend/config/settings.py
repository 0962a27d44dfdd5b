"""
Benchmark Settings Configuration Module

Defaults for dataset generation and backend wiring, TOML loaders and the
environment overrides applied on top of them.
"""
import hashlib
import json
import os
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

from dotenv import load_dotenv
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from backend.exceptions import ConfigError

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

# Dataset generation defaults
DEFAULT_GENERATION_SETTINGS = {
    "seed": 0,
    "transforms_per_image": 2,
    "paraphrases_per_transform": 3,
    "max_foreground_objects": 5,
    "min_object_area_fraction": 0.01,
    "max_object_area_fraction": 0.70,
    "max_resample_attempts": 50,
}

# Difficulty buckets on IoU(before, after)
DEFAULT_DIFFICULTY_THRESHOLDS = {
    "t_easy": 0.5,
    "t_hard": 0.1,
}

# Transform parameter ranges; signed kinds draw a random sign
DEFAULT_PARAMETER_RANGES = {
    "translation": (25.0, 250.0),
    "scale": (0.5, 2.0),
    "rotation": (10.0, 90.0),
    "shear": (0.1, 0.5),
}

DEFAULT_KINDS = ("move", "scale", "flip", "shear", "rotate", "mix")

DEFAULT_BACKEND_SETTINGS = {
    "endpoint_url": "http://127.0.0.1:8000",
    "timeout": 30.0,
    "max_retries": 2,
    "template_version": "v1",
    "max_concurrency": 4,
}

STAGES = ("grounder", "refiner", "reasoner", "drawer")

STAGE_KINDS = {
    "grounder": ("http", "oracle", "jitter"),
    "refiner": ("http", "oracle"),
    "reasoner": ("http", "compiler", "noisy"),
    "drawer": ("http", "reference"),
}

DETECTOR_KINDS = ("drawn_mask", "refiner")

ENV_PREFIX = "POEM_"


def _stable_hash(data: Any) -> str:
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class HashableSettings(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    def config_hash(self) -> str:
        return _stable_hash(self.model_dump(mode="json"))


class BackendConfig(HashableSettings):
    endpoint_url: str = DEFAULT_BACKEND_SETTINGS["endpoint_url"]
    timeout: float = Field(default=DEFAULT_BACKEND_SETTINGS["timeout"], gt=0)
    max_retries: int = Field(default=DEFAULT_BACKEND_SETTINGS["max_retries"], ge=0)
    template_version: str = DEFAULT_BACKEND_SETTINGS["template_version"]
    max_concurrency: int = Field(default=DEFAULT_BACKEND_SETTINGS["max_concurrency"], ge=1)

    @field_validator("endpoint_url")
    @classmethod
    def _endpoint_scheme(cls, v: str) -> str:
        if not v.startswith(("http://", "https://")):
            raise ValueError(f"endpoint must be an http(s) URL, got {v!r}")
        return v.rstrip("/")


class StageBackendSettings(HashableSettings):
    """One stage of the pipeline: which implementation and how to reach it"""

    stage: str
    kind: str
    http: Optional[BackendConfig] = None
    options: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="before")
    @classmethod
    def _default_http(cls, data: Any) -> Any:
        if isinstance(data, dict) and data.get("kind") == "http" and data.get("http") is None:
            data = {**data, "http": {}}
        return data

    @model_validator(mode="after")
    def _kind_for_stage(self):
        allowed = STAGE_KINDS.get(self.stage)
        if allowed is None:
            raise ValueError(f"unknown stage {self.stage!r}")
        if self.kind not in allowed:
            raise ValueError(f"{self.stage} kind must be one of {allowed}, got {self.kind!r}")
        return self


class PipelineSettings(HashableSettings):
    label: str = "default"
    seed: int = 0
    grounder: StageBackendSettings = StageBackendSettings(stage="grounder", kind="oracle")
    refiner: StageBackendSettings = StageBackendSettings(stage="refiner", kind="oracle")
    reasoner: StageBackendSettings = StageBackendSettings(stage="reasoner", kind="compiler")
    drawer: StageBackendSettings = StageBackendSettings(stage="drawer", kind="reference")
    detector: str = "drawn_mask"

    @field_validator("detector")
    @classmethod
    def _detector_kind(cls, v: str) -> str:
        if v not in DETECTOR_KINDS:
            raise ValueError(f"detector must be one of {DETECTOR_KINDS}, got {v!r}")
        return v

    def stage(self, name: str) -> StageBackendSettings:
        return getattr(self, name)

    def template_versions(self) -> Dict[str, str]:
        return {
            name: self.stage(name).http.template_version
            for name in ("grounder", "reasoner")
            if self.stage(name).http is not None
        }


class ParameterRanges(HashableSettings):
    translation: Tuple[float, float] = DEFAULT_PARAMETER_RANGES["translation"]
    scale: Tuple[float, float] = DEFAULT_PARAMETER_RANGES["scale"]
    rotation: Tuple[float, float] = DEFAULT_PARAMETER_RANGES["rotation"]
    shear: Tuple[float, float] = DEFAULT_PARAMETER_RANGES["shear"]

    @model_validator(mode="after")
    def _ordered(self):
        for name in ("translation", "scale", "rotation", "shear"):
            lo, hi = getattr(self, name)
            if not (0 <= lo <= hi):
                raise ValueError(f"{name} range must satisfy 0 <= low <= high, got ({lo}, {hi})")
        if self.scale[0] <= 0:
            raise ValueError("scale range must be strictly positive")
        return self


class GenerationConfig(HashableSettings):
    seed: int = DEFAULT_GENERATION_SETTINGS["seed"]
    transforms_per_image: int = Field(default=DEFAULT_GENERATION_SETTINGS["transforms_per_image"], ge=1)
    paraphrases_per_transform: int = Field(default=DEFAULT_GENERATION_SETTINGS["paraphrases_per_transform"], ge=1)
    max_foreground_objects: int = Field(default=DEFAULT_GENERATION_SETTINGS["max_foreground_objects"], ge=1)
    min_object_area_fraction: float = Field(default=DEFAULT_GENERATION_SETTINGS["min_object_area_fraction"], gt=0, lt=1)
    max_object_area_fraction: float = Field(default=DEFAULT_GENERATION_SETTINGS["max_object_area_fraction"], gt=0, lt=1)
    max_resample_attempts: int = Field(default=DEFAULT_GENERATION_SETTINGS["max_resample_attempts"], ge=1)
    t_easy: float = Field(default=DEFAULT_DIFFICULTY_THRESHOLDS["t_easy"], ge=0, le=1)
    t_hard: float = Field(default=DEFAULT_DIFFICULTY_THRESHOLDS["t_hard"], ge=0, le=1)
    kinds: Tuple[str, ...] = DEFAULT_KINDS
    ranges: ParameterRanges = ParameterRanges()

    @model_validator(mode="after")
    def _consistent(self):
        if self.min_object_area_fraction >= self.max_object_area_fraction:
            raise ValueError("min_object_area_fraction must be below max_object_area_fraction")
        if self.t_hard >= self.t_easy:
            raise ValueError("t_hard must be below t_easy")
        unknown = [k for k in self.kinds if k not in DEFAULT_KINDS]
        if unknown or not self.kinds:
            raise ValueError(f"kinds must be a non-empty subset of {DEFAULT_KINDS}, got {self.kinds}")
        return self


def load_environment(env_file: Optional[Union[str, Path]] = None):
    """Load .env (or the given file) without clobbering variables already set"""
    if env_file is not None:
        load_dotenv(env_file, override=False)
    else:
        load_dotenv(override=False)


def read_toml(path: Union[str, Path]) -> Dict[str, Any]:
    try:
        with open(path, "rb") as f:
            return tomllib.load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"invalid TOML in {path}: {e}") from e


def _env_float(environ: Mapping[str, str], key: str) -> Optional[float]:
    raw = environ.get(key)
    if raw is None or raw == "":
        return None
    try:
        return float(raw)
    except ValueError as e:
        raise ConfigError(f"{key} must be a number of seconds, got {raw!r}") from e


def _stage_payload(stage: str, raw: Mapping[str, Any], environ: Mapping[str, str]) -> Dict[str, Any]:
    raw = dict(raw or {})
    kind = raw.pop("kind", None)
    if kind is None:
        raise ConfigError(f"[{stage}] needs a kind")
    options = dict(raw.pop("options", {}) or {})
    http_keys = {k: raw.pop(k) for k in list(raw) if k in BackendConfig.model_fields}
    options.update(raw)

    payload: Dict[str, Any] = {"stage": stage, "kind": kind, "options": options}
    if kind == "http":
        endpoint = environ.get(f"{ENV_PREFIX}{stage.upper()}_ENDPOINT") or environ.get(f"{ENV_PREFIX}BACKEND_ENDPOINT")
        timeout = _env_float(environ, f"{ENV_PREFIX}{stage.upper()}_TIMEOUT")
        if timeout is None:
            timeout = _env_float(environ, f"{ENV_PREFIX}BACKEND_TIMEOUT")
        if endpoint:
            http_keys["endpoint_url"] = endpoint
        if timeout is not None:
            http_keys["timeout"] = timeout
        payload["http"] = http_keys
    return payload


def build_pipeline_settings(data: Mapping[str, Any], environ: Optional[Mapping[str, str]] = None) -> PipelineSettings:
    environ = os.environ if environ is None else environ
    payload: Dict[str, Any] = {k: v for k, v in data.items() if k not in STAGES}
    for stage in STAGES:
        if stage in data:
            payload[stage] = _stage_payload(stage, data[stage], environ)
    try:
        return PipelineSettings.model_validate(payload)
    except ValidationError as e:
        raise ConfigError(f"invalid backend settings: {e}") from e


def load_pipeline_settings(path: Optional[Union[str, Path]] = None, environ: Optional[Mapping[str, str]] = None) -> PipelineSettings:
    """Backend wiring from a TOML file (or defaults) with POEM_* environment overrides"""
    load_environment()
    data = read_toml(path) if path is not None else {}
    settings = build_pipeline_settings(data, environ)
    logger.info(f"Loaded pipeline settings '{settings.label}' ({settings.config_hash()[:12]})")
    return settings


def load_generation_config(path: Optional[Union[str, Path]] = None, **overrides: Any) -> GenerationConfig:
    data = dict(read_toml(path)) if path is not None else {}
    data = dict(data.get("generation", data))
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return GenerationConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid generation config: {e}") from e


def validate_settings(data: Mapping[str, Any], kind: str = "pipeline") -> List[str]:
    """Validate raw settings; returns a list of human-readable errors (empty when valid)"""
    errors = []
    try:
        if kind == "pipeline":
            build_pipeline_settings(data, environ={})
        elif kind == "generation":
            GenerationConfig.model_validate(dict(data.get("generation", data)))
        else:
            errors.append(f"unknown settings kind {kind!r}")
    except ConfigError as e:
        cause = e.__cause__
        if isinstance(cause, ValidationError):
            errors.extend(f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in cause.errors())
        else:
            errors.append(str(e))
    except ValidationError as e:
        errors.extend(f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors())
    return errors


def get_settings_summary(settings: PipelineSettings) -> Dict[str, Any]:
    """Get a summary of backend settings for logs and report headers"""
    stages = {}
    for name in STAGES:
        stage = settings.stage(name)
        stages[name] = stage.kind if stage.http is None else f"{stage.kind} -> {stage.http.endpoint_url}"
    return {
        "label": settings.label,
        "seed": settings.seed,
        "config_hash": settings.config_hash(),
        "stages": stages,
        "detector": settings.detector,
        "template_versions": settings.template_versions(),
    }
