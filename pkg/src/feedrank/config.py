"""Engine configuration and the flat key=value config file format."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Dict, Mapping

from .active import ALParams
from .feedback import FeedbackConfig
from .ltr import MartParams


@dataclass(frozen=True)
class EngineConfig:
    epsilon: float = 0.64
    top_n: int = 10
    trees: int = 100
    learning_rate: float = 0.1
    max_leaves: int = 8
    min_samples_leaf: int = 1
    sigma: float = 1.0
    gamma: float = 0.3
    beta: float = 1.0
    delta_metric: str = "MAP"
    lambda_sign: str = "standard"
    idf_mode: str = "smooth"
    alg1_mode: str = "per_api"
    al_batch: int = 1
    al_max_iterations: int = 10
    pool_similarity: float = 0.5
    seed: int = 0

    def mart_params(self) -> MartParams:
        return MartParams(
            n_trees=self.trees,
            learning_rate=self.learning_rate,
            max_leaves=self.max_leaves,
            min_samples_leaf=self.min_samples_leaf,
            sigma=self.sigma,
            gamma=self.gamma,
            beta=self.beta,
            delta_metric=self.delta_metric,
            lambda_sign=self.lambda_sign,
        )

    def feedback_config(self) -> FeedbackConfig:
        return FeedbackConfig(epsilon=self.epsilon)

    def al_params(self) -> ALParams:
        return ALParams(batch_size=self.al_batch, max_iterations=self.al_max_iterations)

    def with_overrides(self, **overrides) -> "EngineConfig":
        cleaned = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **cleaned) if cleaned else self


def read_config_file(path) -> Dict[str, str]:
    """Flat UTF-8 key=value lines; '#' starts a comment, blanks are skipped.
    Keys may use '-' or '_' interchangeably."""
    values: Dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}: line {lineno}: expected key=value")
        key, _, value = stripped.partition("=")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def config_from_mapping(values: Mapping[str, str], base: EngineConfig = EngineConfig()) -> EngineConfig:
    known = {f.name: f.type for f in fields(EngineConfig)}
    overrides = {}
    for key, raw in values.items():
        if key not in known:
            raise ValueError(f"unknown config key {key!r}")
        current = getattr(base, key)
        if isinstance(current, bool):
            overrides[key] = raw.lower() in ("1", "true", "yes", "on")
        elif isinstance(current, int):
            overrides[key] = int(raw)
        elif isinstance(current, float):
            overrides[key] = float(raw)
        else:
            overrides[key] = raw
    return base.with_overrides(**overrides)


def load_config(path, base: EngineConfig = EngineConfig()) -> EngineConfig:
    return config_from_mapping(read_config_file(path), base)
