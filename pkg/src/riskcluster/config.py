"""YAML configuration: loading, defaults and digests."""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, fields
from importlib.resources import files
from pathlib import Path
from typing import Any, Mapping

import yaml

from .errors import ConfigError
from .synth import SyntheticCohortConfig


@dataclass(frozen=True)
class PipelineSettings:
    train_fraction: float = 0.7
    stratify: bool = False
    kmax: int = 10
    k: int | None = None
    components: int | None = None  # overrides the eigenvalue > 1 rule
    kmeans_restarts: int = 10
    kmeans_max_iter: int = 300
    cv_folds: int = 10
    n_lambda: int = 100
    lambda_min_ratio: float = 1e-4
    lambda_rule: str = "min"
    threshold: float | str = 0.5

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ConfigError(f"train_fraction {self.train_fraction} outside (0, 1)")
        if self.lambda_rule not in ("min", "1se"):
            raise ConfigError(f"lambda_rule must be 'min' or '1se', got {self.lambda_rule!r}")
        if isinstance(self.threshold, str) and self.threshold != "youden":
            raise ConfigError(f"threshold must be a number or 'youden', got {self.threshold!r}")
        if self.kmax < 3:
            raise ConfigError("kmax must be at least 3 for the elbow rule")
        if self.k is not None and self.k < 1:
            raise ConfigError("k must be positive")
        if self.components is not None and self.components < 1:
            raise ConfigError("components must be positive")
        if self.cv_folds < 2:
            raise ConfigError("cv_folds must be at least 2")
        if self.n_lambda < 2 or not 0 < self.lambda_min_ratio < 1:
            raise ConfigError("need n_lambda >= 2 and 0 < lambda_min_ratio < 1")

    @classmethod
    def from_dict(cls, d: Mapping[str, Any] | None) -> "PipelineSettings":
        d = dict(d or {})
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown pipeline keys: {unknown}")
        threshold = d.get("threshold", 0.5)
        if isinstance(threshold, str) and threshold != "youden":
            try:
                threshold = float(threshold)
            except ValueError:
                raise ConfigError(f"threshold must be a number or 'youden', got {threshold!r}") from None
        d["threshold"] = threshold
        try:
            for key in ("kmax", "kmeans_restarts", "kmeans_max_iter", "cv_folds", "n_lambda"):
                if key in d:
                    d[key] = int(d[key])
            for key in ("k", "components"):
                if d.get(key) is not None:
                    d[key] = int(d[key])
            for key in ("train_fraction", "lambda_min_ratio"):
                if key in d:
                    d[key] = float(d[key])
            if "stratify" in d:
                d["stratify"] = bool(d["stratify"])
        except (TypeError, ValueError) as err:
            raise ConfigError(str(err)) from None
        return cls(**d)

    def as_dict(self) -> dict:
        return asdict(self)


def default_config_text() -> str:
    return files("riskcluster").joinpath("data/default_config.yaml").read_text(encoding="utf-8")


def load_config(path: str | Path | None = None) -> dict:
    """Parse a YAML config; ``None`` loads the packaged default."""
    try:
        text = default_config_text() if path is None else Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigError(f"cannot read config: {err}") from None
    try:
        cfg = yaml.safe_load(text) or {}
    except yaml.YAMLError as err:
        raise ConfigError(f"invalid YAML in config: {err}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a mapping with 'generator' and/or 'pipeline' sections")
    unknown = sorted(set(cfg) - {"generator", "pipeline"})
    if unknown:
        raise ConfigError(f"unknown top-level config keys: {unknown}")
    return cfg


def with_pipeline_overrides(cfg: Mapping, **overrides) -> dict:
    out = copy.deepcopy(dict(cfg))
    section = dict(out.get("pipeline") or {})
    section.update({k: v for k, v in overrides.items() if v is not None})
    out["pipeline"] = section
    return out


def pipeline_settings(cfg: Mapping) -> PipelineSettings:
    return PipelineSettings.from_dict(cfg.get("pipeline"))


def generator_config(cfg: Mapping, **overrides) -> SyntheticCohortConfig:
    section = dict(cfg.get("generator") or {})
    section.update({k: v for k, v in overrides.items() if v is not None})
    if not section:
        raise ConfigError("config has no 'generator' section")
    return SyntheticCohortConfig.from_dict(section)


def config_digest(cfg: Mapping) -> str:
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode()).hexdigest()
