"""Layered configuration for training, inference and the CLI runtime.

All settings classes read ``RANKVEC_``-prefixed environment variables.
Values passed to the constructor (the CLI flags) take precedence over the
environment, which takes precedence over the built-in defaults below.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, TypeVar

from pydantic import Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from src.common.errors import RankvecUsageError

ENV_PREFIX = "RANKVEC_"

DEFAULT_DIM = 64
DEFAULT_FEATURES = 1024
DEFAULT_DROPOUT = 0.1

SettingsT = TypeVar("SettingsT", bound=BaseSettings)


class TrainConfig(BaseSettings):
    """Every scalar of the combined contrastive + rank-distillation objective."""

    model_config = SettingsConfigDict(env_prefix=ENV_PREFIX, frozen=True, extra="ignore")

    batch_size: int = Field(default=64, ge=2, description="Sentences per batch (m).")
    temperature: float = Field(default=0.05, gt=0.0, description="Contrastive softmax temperature.")
    lambda_train: float = Field(default=0.05, gt=0.0, description="Weight of the rank loss.")
    tau_l: float = Field(default=0.5, ge=-1.0, le=1.0, description="Lower pair-filter threshold.")
    tau_u: float = Field(default=0.8, ge=-1.0, le=1.0, description="Upper pair-filter threshold.")
    dropout_rate: float = Field(default=DEFAULT_DROPOUT, ge=0.0, lt=1.0)
    learning_rate: float = Field(default=0.1, gt=0.0, description="Plain gradient-descent step.")
    epochs: int = Field(default=1, ge=0)
    seed: int = Field(default=0, ge=0)
    dim: int = Field(default=DEFAULT_DIM, ge=1, description="Embedding dimension D of E_2.")
    n_features: int = Field(default=DEFAULT_FEATURES, ge=1, description="Hashed feature count F.")

    @model_validator(mode="after")
    def _check_thresholds(self) -> TrainConfig:
        if self.tau_l > self.tau_u:
            raise ValueError("tau_l must not exceed tau_u")
        return self


class InferenceConfig(BaseSettings):
    """Weight of the rank-vector term in the blended pair similarity."""

    model_config = SettingsConfigDict(env_prefix=ENV_PREFIX, frozen=True, extra="ignore")

    lambda_inf: float = Field(default=0.1, ge=0.0, le=1.0)


class RuntimeSettings(BaseSettings):
    """Process-level knobs shared by every subcommand."""

    model_config = SettingsConfigDict(env_prefix=ENV_PREFIX, frozen=True, extra="ignore")

    log_level: str = "WARNING"
    threads: int | None = Field(default=None, ge=1)
    metrics_out: Path | None = None


def resolve(cls: type[SettingsT], **overrides: Any) -> SettingsT:
    """Build *cls* from the non-``None`` overrides, env vars and defaults.

    Pydantic validation failures surface as :class:`RankvecUsageError` with a
    single-line message listing every violated constraint.
    """
    given = {k: v for k, v in overrides.items() if v is not None}
    try:
        return cls(**given)
    except ValidationError as exc:
        messages = []
        for err in exc.errors():
            msg = str(err["msg"]).removeprefix("Value error, ")
            loc = ".".join(str(part) for part in err["loc"])
            messages.append(f"{loc}: {msg}" if loc else msg)
        raise RankvecUsageError("; ".join(messages)) from exc


def field_default(cls: type[BaseSettings], name: str) -> Any:
    """Return the declared default of ``cls.name`` (used in ``--help`` texts)."""
    return cls.model_fields[name].default
