"""Configuration management for the finality calculator."""

import json
import os
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class NetworkParams(BaseModel):
    """Network model: block production rate and adversary power."""

    model_config = ConfigDict(frozen=True)

    blocks_per_round_target: float = Field(
        default=5.0,
        gt=0,
        description="Expected number of blocks per round (e)"
    )

    byzantine_fraction: float = Field(
        default=0.3,
        ge=0,
        lt=1,
        description="Upper bound on the adversary's share of block production (f)"
    )

    history_window: int = Field(
        default=900,
        ge=1,
        description="Rounds before s in which the adversarial lead may start building"
    )

    @property
    def adversary_rate(self) -> float:
        """Expected adversarial blocks per round, f*e."""
        return self.blocks_per_round_target * self.byzantine_fraction

    @property
    def honest_rate(self) -> float:
        """Expected honest blocks per round, (1-f)*e."""
        return self.blocks_per_round_target - self.adversary_rate


class TruncationConfig(BaseModel):
    """Truncation bounds for the otherwise unbounded sums."""

    model_config = ConfigDict(frozen=True)

    max_k_lb: int = Field(
        default=400,
        ge=1,
        description="Largest value of L and B that is materialized"
    )

    max_k_m: int = Field(
        default=100,
        ge=1,
        description="Largest value of M that is materialized"
    )

    min_i_l: int = Field(
        default=1,
        ge=0,
        description=(
            "Smallest lead-window index; 0 adds the single-round window [s, s], "
            "without which the envelope does not bound the Monte-Carlo lead walk"
        )
    )

    max_i_l: int = Field(
        default=25,
        ge=1,
        description="Largest lead-window index (window [s-i, s])"
    )

    max_i_m: int = Field(
        default=100,
        ge=1,
        description="Number of future rounds searched for the M envelope"
    )

    early_stop_floor: float = Field(
        default=1e-25,
        gt=0,
        lt=1,
        description="Probability below which computations stop and values count as zero"
    )

    @model_validator(mode="after")
    def check_lead_range(self):
        if self.min_i_l > self.max_i_l:
            raise ValueError(
                f"min_i_l ({self.min_i_l}) must not exceed max_i_l ({self.max_i_l})"
            )
        return self


def effective_max_i_l(params: NetworkParams, trunc: TruncationConfig) -> int:
    """Lead-window bound after capping by the history window."""
    return min(trunc.max_i_l, params.history_window)


class CalculatorConfig(BaseModel):
    """Top-level configuration loaded from file and environment."""

    network: NetworkParams = Field(
        default_factory=NetworkParams,
        description="Network model parameters"
    )

    truncation: TruncationConfig = Field(
        default_factory=TruncationConfig,
        description="Truncation bounds"
    )

    log_level: str = Field(
        default="INFO",
        description="Logging level (DEBUG, INFO, WARNING, ERROR)"
    )

    workers: int = Field(
        default=1,
        ge=1,
        description="Threads used to evaluate report rounds"
    )

    model_config = ConfigDict(extra="ignore")


_ENV_NETWORK = {
    "TIPSET_FINALITY_BLOCKS_PER_ROUND": "blocks_per_round_target",
    "TIPSET_FINALITY_BYZANTINE_FRACTION": "byzantine_fraction",
}


def load_config(config_path: Optional[Path] = None) -> CalculatorConfig:
    """
    Load configuration from file or environment variables.

    Priority:
    1. Explicitly provided config file
    2. config.json in package directory
    3. Environment variables (override file values)
    4. Defaults

    Args:
        config_path: Optional path to config file

    Returns:
        CalculatorConfig instance

    Raises:
        FileNotFoundError: If an explicit config_path does not exist
        pydantic.ValidationError: If any value violates its constraints
    """
    config_data = {}

    if config_path is not None:
        if not config_path.exists():
            raise FileNotFoundError(f"Config file not found: {config_path}")
        with open(config_path) as f:
            config_data = json.load(f)
    else:
        default_config = Path(__file__).parent / "config.json"
        if default_config.exists():
            with open(default_config) as f:
                config_data = json.load(f)

    network = dict(config_data.get("network", {}))
    for env_name, field_name in _ENV_NETWORK.items():
        value = os.getenv(env_name)
        if value:
            network[field_name] = float(value)
    config_data["network"] = network

    log_level_env = os.getenv("TIPSET_FINALITY_LOG_LEVEL")
    if log_level_env:
        config_data["log_level"] = log_level_env

    workers_env = os.getenv("TIPSET_FINALITY_WORKERS")
    if workers_env:
        config_data["workers"] = int(workers_env)

    return CalculatorConfig(**config_data)
