"""Synthetic chain traces at a given chain fullness."""

import logging
from typing import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .chain import ChainTrace
from .errors import RangeError
from .kernel import poisson_cap, poisson_pmf_array

logger = logging.getLogger("tipset_finality")

MAX_SEED = 2**64 - 1


class SimConfig(BaseModel):
    """Parameters for one synthetic trace."""

    model_config = ConfigDict(frozen=True)

    fullness: float = Field(
        ...,
        ge=0,
        le=1.2,
        description="Chain fullness: observed blocks per tipset over the target"
    )

    rounds: int = Field(
        ...,
        ge=1,
        description="Number of rounds to generate"
    )

    seed: int = Field(
        default=0,
        ge=0,
        le=MAX_SEED,
        description="Seed of the pseudorandom generator"
    )

    blocks_per_round_target: float = Field(
        default=5.0,
        gt=0,
        description="Expected blocks per round at full chain (e)"
    )

    start_round: int = Field(
        default=0,
        description="Round number of the first tipset"
    )

    @property
    def rate(self) -> float:
        return self.fullness * self.blocks_per_round_target


def derive_seed(seed: int, *keys: int) -> int:
    """Child seed for the run/fullness identified by `keys`; stable across platforms."""
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=tuple(keys))
    return int(sequence.generate_state(1, np.uint64)[0])


def poisson_inversion(uniforms: np.ndarray, rate: float) -> np.ndarray:
    """Map U(0,1) draws to Poisson(rate) counts by inverting the CDF."""
    if rate == 0:
        return np.zeros(uniforms.shape, dtype=np.int64)
    cap = poisson_cap(rate)
    cdf = np.cumsum(poisson_pmf_array(np.arange(cap + 1), rate))
    counts = np.searchsorted(cdf, uniforms, side="right")
    return np.minimum(counts, cap).astype(np.int64)


def sample_counts(rate: float, n: int, seed: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(seed))
    return poisson_inversion(rng.random(n), rate)


def generate_trace(config: SimConfig) -> ChainTrace:
    """
    Draw `rounds` i.i.d. Poisson(fullness * e) block counts.

    The same config always yields the same trace.
    """
    counts = sample_counts(config.rate, config.rounds, config.seed)
    logger.debug(
        f"Generated {config.rounds} rounds at fullness {config.fullness} "
        f"(mean {counts.mean():.4f})"
    )
    return ChainTrace(config.start_round, tuple(counts.tolist()))


def inject_segment(
    trace: ChainTrace,
    start_round: int,
    length: int,
    fullness: float,
    blocks_per_round_target: float = 5.0,
    seed: int = 0,
) -> ChainTrace:
    """
    Replace rounds start_round .. start_round+length-1 with counts drawn at
    another fullness, e.g. a period of degraded block production.

    Raises:
        RangeError: If the segment does not fit in the trace
    """
    if length < 1:
        raise RangeError(f"segment length must be positive, got {length}")
    trace.require_window(start_round, start_round + length - 1)
    segment = sample_counts(fullness * blocks_per_round_target, length, seed)

    counts = list(trace.counts)
    first = start_round - trace.start_round
    counts[first:first + length] = segment.tolist()
    logger.info(f"Injected {length} rounds at fullness {fullness} from round {start_round}")
    return ChainTrace(trace.start_round, tuple(counts))


def generate_runs(fullness: float, rounds: int, runs: int, seed: int,
                  blocks_per_round_target: float = 5.0) -> Sequence[ChainTrace]:
    """Independent traces for one fullness; run i uses derive_seed(seed, i)."""
    return [
        generate_trace(SimConfig(
            fullness=fullness,
            rounds=rounds,
            seed=derive_seed(seed, run),
            blocks_per_round_target=blocks_per_round_target,
        ))
        for run in range(runs)
    ]
