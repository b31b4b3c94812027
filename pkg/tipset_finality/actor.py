"""Actor-view error probability, computable from on-chain data alone.

An actor only sees the blocks that made it into the chain. Blocks that were
produced but left out are attributed to the adversary: for a window of rounds
with `chain_blocks` on-chain blocks, the total production T is Poisson
conditioned on T >= chain_blocks, Z = T - chain_blocks blocks are missing, and
X_f ~ Binomial(T, f) are malicious. BpZ = X_f + Z bounds what a competing fork
can draw on; it double counts malicious blocks that are also missing.

BpZ replaces the Poisson laws of L and B in the node-view combination; M and
the honest advantage G are unchanged.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict

import numpy as np

from .chain import ACTOR_VIEW, ChainTrace, FinalityReport, ReportEntry
from .config import NetworkParams, TruncationConfig, effective_max_i_l
from .errors import DegenerateConditionError, RangeError
from .kernel import (
    Pmf,
    binomial_cdf_array,
    binomial_pmf_array,
    complete_at_zero,
    early_stop_length,
    pointwise_max_envelope,
    poisson_pmf_array,
    poisson_tail,
)
from .node import (
    AdvantageKernel,
    SpanDistributions,
    combine_error,
    future_distribution,
    map_rounds,
    report_rounds,
)

logger = logging.getLogger("tipset_finality")


@dataclass(frozen=True)
class BpzContext:
    """A window of `window_rounds` rounds holding `chain_blocks` on-chain blocks."""

    window_rounds: int
    chain_blocks: int
    params: NetworkParams

    def __post_init__(self):
        if self.window_rounds < 1:
            raise RangeError(f"window must span at least one round, got {self.window_rounds}")
        if self.chain_blocks < 0:
            raise RangeError(f"chain_blocks must be non-negative, got {self.chain_blocks}")

    @property
    def production_rate(self) -> float:
        """Expected blocks produced over the window, window_rounds * e."""
        return self.window_rounds * self.params.blocks_per_round_target


def conditional_total_pmf(ctx: BpzContext, trunc: TruncationConfig) -> Pmf:
    """
    P(T = k | T >= chain_blocks) for k in [chain_blocks, chain_blocks + max_k_lb].

    Raises:
        DegenerateConditionError: If P(T >= chain_blocks) is below the early-stop floor
    """
    rate = ctx.production_rate
    chain = ctx.chain_blocks
    tail = poisson_tail(chain, rate)
    if tail < trunc.early_stop_floor:
        raise DegenerateConditionError(ctx.window_rounds, chain, tail)

    ts = np.arange(chain, chain + trunc.max_k_lb + 1)
    mass = poisson_pmf_array(ts, rate) / tail
    return Pmf(chain, mass[:early_stop_length(mass, trunc.early_stop_floor)])


@lru_cache(maxsize=8192)
def bpz_pmf(ctx: BpzContext, trunc: TruncationConfig, range_sum: bool = False) -> Pmf:
    """
    Distribution of BpZ = X_f + Z given the window's on-chain block count.

    Support is [0, chain_blocks + max_k_lb] so that lead offsets of up to
    max_k_lb above the chain count can be read off directly.

    With `range_sum`, each total t = z + chain contributes the binomial mass
    of b in [k - z, min(k, t)] rather than exactly b = k - z. The result is an
    upper-bound envelope that no longer sums to one.

    Raises:
        DegenerateConditionError: If the window's chain count is implausible
    """
    total = conditional_total_pmf(ctx, trunc)
    f = ctx.params.byzantine_fraction
    ts = np.arange(total.offset, total.end + 1)[:, None]
    zs = ts - ctx.chain_blocks
    ks = np.arange(ctx.chain_blocks + trunc.max_k_lb + 1)[None, :]

    if range_sum:
        upper = binomial_cdf_array(np.minimum(ks, ts), ts, f)
        lower = binomial_cdf_array(ks - zs - 1, ts, f)
        weights = np.where(zs <= ks, upper - lower, 0.0)
    else:
        weights = binomial_pmf_array(ks - zs, ts, f)

    mass = total.mass @ weights
    mass = np.clip(mass[:early_stop_length(mass, trunc.early_stop_floor)], 0.0, 1.0)
    return Pmf(0, mass, envelope=range_sum)


def actor_lead_distribution(
    trace: ChainTrace,
    s: int,
    params: NetworkParams,
    trunc: TruncationConfig,
    range_sum: bool = False,
) -> Pmf:
    """
    Envelope of P(L = k) with BpZ replacing the Poisson adversary of each window.

    Raises:
        RangeError: If the trace does not reach back to s - max_i_l
        DegenerateConditionError: If a window's chain count is implausible
    """
    max_i = effective_max_i_l(params, trunc)
    trace.require_window(s - max_i, s)

    # each window read relative to its own chain count, so all start at lead 0
    windows = []
    for i in range(trunc.min_i_l, max_i + 1):
        chain_i = trace.window_sum(s - i, s)
        bpz = bpz_pmf(BpzContext(i + 1, chain_i, params), trunc, range_sum)
        windows.append(Pmf(0, bpz.values(chain_i, chain_i + trunc.max_k_lb), envelope=True))
    envelope = pointwise_max_envelope(windows).mass
    envelope = envelope[:early_stop_length(envelope, trunc.early_stop_floor)]
    return Pmf(0, envelope, envelope=True)


def actor_recent_distribution(
    trace: ChainTrace,
    s: int,
    c: int,
    params: NetworkParams,
    trunc: TruncationConfig,
    range_sum: bool = False,
) -> Pmf:
    """
    BpZ over rounds s+1..c, conditioned on the chain's blocks in that window.

    Raises:
        RangeError: If c <= s or the window is outside the trace
    """
    if c <= s:
        raise RangeError(f"current round {c} must follow target round {s}")
    chain = trace.window_sum(s + 1, c)
    return bpz_pmf(BpzContext(c - s, chain, params), trunc, range_sum)


def actor_span_distributions(
    trace: ChainTrace,
    s: int,
    c: int,
    params: NetworkParams,
    trunc: TruncationConfig,
    range_sum: bool = False,
) -> SpanDistributions:
    if c <= s:
        raise RangeError(f"current round {c} must follow target round {s}")
    trace.require_window(s - effective_max_i_l(params, trunc), c)
    return SpanDistributions(
        lead=actor_lead_distribution(trace, s, params, trunc, range_sum),
        recent=actor_recent_distribution(trace, s, c, params, trunc, range_sum),
        future=future_distribution(params, trunc),
    )


def actor_error_probability(
    trace: ChainTrace,
    s: int,
    c: int,
    params: NetworkParams,
    trunc: TruncationConfig,
    range_sum: bool = False,
) -> float:
    """
    Actor-view bound on the probability that the tipset at s is reorganized out.

    Raises:
        RangeError: If c <= s or the trace lacks history
        DegenerateConditionError: If a window's chain count is implausible
    """
    spans = actor_span_distributions(trace, s, c, params, trunc, range_sum)
    return combine_error(
        complete_at_zero(spans.lead),
        spans.recent,
        spans.future,
        trace.good_advantage(s, c),
        trunc.early_stop_floor,
    )


def actor_report(
    trace: ChainTrace,
    settlement: int,
    params: NetworkParams,
    trunc: TruncationConfig,
    workers: int = 1,
    range_sum: bool = False,
) -> FinalityReport:
    """
    Actor-view bound for every round with enough history.

    Raises:
        RangeError: If the trace is shorter than settlement + max_i_l rounds
        DegenerateConditionError: If a window's chain count is implausible
    """
    rounds = report_rounds(trace, settlement, params, trunc)
    floor = trunc.early_stop_floor
    future = future_distribution(params, trunc)
    advantages: Dict[int, int] = {c: trace.good_advantage(c - settlement, c) for c in rounds}

    @lru_cache(maxsize=None)
    def kernel_for(advantage: int) -> AdvantageKernel:
        recent = bpz_pmf(BpzContext(settlement, advantage, params), trunc, range_sum)
        return AdvantageKernel(recent, future, advantage)

    def evaluate(c: int) -> ReportEntry:
        s = c - settlement
        k = advantages[c]
        lead = complete_at_zero(actor_lead_distribution(trace, s, params, trunc, range_sum))
        return ReportEntry(
            target_round=s,
            current_round=c,
            good_advantage=k,
            error_probability=kernel_for(k).error(lead, k, floor) if k > 0 else 1.0,
            view=ACTOR_VIEW,
        )

    entries = map_rounds(evaluate, rounds, workers)
    logger.debug(
        f"Actor report: settlement={settlement}, {len(entries)} rounds, "
        f"{kernel_for.cache_info().currsize} distinct advantages"
    )
    return FinalityReport(entries)
