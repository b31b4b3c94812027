"""Node-view error probability: distant past (L), recent past (B), future (M).

A full node sees every chain that ends in an honest block, so the adversary's
best strategy is a private, malicious-only extension of the empty competitor.
The bound combines three spans around the target round s and current round c:

  L  adversarial lead built before s (envelope over attack lengths)
  B  adversarial blocks produced in (s, c]
  M  future adversarial blocks minus slowed honest growth (Skellam envelope)

The honest advantage is G = chain[s+1, c]; round s itself is not counted so
that it does not overlap the lead windows, which end at s.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, List, Sequence

import numpy as np

from .chain import NODE_VIEW, ChainTrace, FinalityReport, ReportEntry
from .config import NetworkParams, TruncationConfig, effective_max_i_l
from .errors import RangeError
from .kernel import (
    Pmf,
    complete_at_zero,
    early_stop_length,
    pointwise_max_envelope,
    poisson_cap,
    poisson_distribution,
    poisson_pmf_array,
    skellam_pmf,
    tail_array,
    tail_from,
)

logger = logging.getLogger("tipset_finality")

# Lead values are evaluated in blocks of k until the envelope early-stops.
K_BLOCK = 64


@dataclass(frozen=True)
class SpanDistributions:
    """Distributions of L, B and M for one (s, c) pair."""

    lead: Pmf
    recent: Pmf
    future: Pmf

    def __post_init__(self):
        if self.lead.offset < 0 or self.recent.offset < 0:
            raise RangeError("lead and recent distributions need non-negative support")


def lead_distribution(
    trace: ChainTrace,
    s: int,
    params: NetworkParams,
    trunc: TruncationConfig,
) -> Pmf:
    """
    Envelope of P(L = k) over attacks of different lengths ending at s.

    For the window [s-i, s] the adversary mines Poisson((i+1) f e) blocks and
    must exceed the chain's blocks over the same window by k.

    Windows run over i in [min_i_l, max_i_l]. With min_i_l=0 the single-round
    window [s, s] is included; only then does the envelope bound the reflected
    lead walk, so the Monte-Carlo soundness check runs with that setting.

    Raises:
        RangeError: If the trace does not reach back to s - max_i_l
    """
    max_i = effective_max_i_l(params, trunc)
    trace.require_window(s - max_i, s)

    windows = np.arange(trunc.min_i_l, max_i + 1)
    rates = (windows + 1) * params.adversary_rate
    offsets = np.array([trace.window_sum(s - i, s) for i in windows])
    # past this k every window's pmf is decreasing, so the envelope is too
    k_peak = max(0, int(np.max(np.floor(rates) - offsets)))

    pieces = []
    envelope = np.zeros(0)
    keep = 0
    for lo in range(0, trunc.max_k_lb + 1, K_BLOCK):
        ks = np.arange(lo, min(lo + K_BLOCK, trunc.max_k_lb + 1))
        grid = poisson_pmf_array(ks[None, :] + offsets[:, None], rates[:, None])
        pieces.append(pointwise_max_envelope([Pmf(lo, row) for row in grid]).mass)
        envelope = np.concatenate(pieces)
        keep = early_stop_length(envelope, trunc.early_stop_floor)
        if keep < envelope.size and lo > k_peak:
            break
    return Pmf(0, envelope[:keep], envelope=True)


def recent_distribution(
    s: int,
    c: int,
    params: NetworkParams,
    trunc: TruncationConfig,
) -> Pmf:
    """
    Adversarial blocks mined in rounds s+1..c: Poisson((c-s) f e).

    Raises:
        RangeError: If c <= s
    """
    if c <= s:
        raise RangeError(f"current round {c} must follow target round {s}")
    rate = (c - s) * params.adversary_rate
    return poisson_distribution(rate, trunc.max_k_lb, trunc.early_stop_floor)


@lru_cache(maxsize=64)
def expected_slowed_growth(params: NetworkParams, floor: float = 1e-25) -> float:
    """
    E[Z]: per-round honest chain growth when the adversary splits honest blocks.

    Blocks B from the previous round can split the H honest blocks of a round
    into 2^B fragments, so growth is (H + B) / 2^B whenever H > 0.
    """
    h_rate = params.honest_rate
    b_rate = params.adversary_rate
    p_honest = 1.0 - float(np.exp(-h_rate))
    if p_honest == 0.0:
        return 0.0

    h = poisson_distribution(h_rate, poisson_cap(h_rate), floor)
    b = poisson_distribution(b_rate, poisson_cap(b_rate), floor)
    hs = np.arange(len(h))[:, None]
    bs = np.arange(len(b))[None, :]
    ratio = (hs + bs) / np.power(2.0, bs)
    return p_honest * float(np.sum(np.outer(h.mass, b.mass) * ratio))


@lru_cache(maxsize=64)
def future_distribution(params: NetworkParams, trunc: TruncationConfig) -> Pmf:
    """
    Envelope of P(M = k), k in [0, max_k_m], over n future rounds.

    M_n ~ Skellam(n f e, n E[Z]); negative values are not materialized since
    only tails P(M >= q) with q >= 1 enter the bound.
    """
    floor = trunc.early_stop_floor
    growth = expected_slowed_growth(params, floor)
    skellams = [
        skellam_pmf(n * params.adversary_rate, n * growth, floor)
        for n in range(1, trunc.max_i_m + 1)
    ]
    envelope = pointwise_max_envelope(skellams).values(0, trunc.max_k_m)
    envelope = envelope[:early_stop_length(envelope, floor)]
    logger.debug(f"Future envelope: E[Z]={growth:.6f}, {envelope.size} points")
    return Pmf(0, envelope, envelope=True)


class AdvantageKernel:
    """
    Precomputed g(r) = P(B >= r) + sum_{b<r} P(B=b) P(M >= r-b) for r <= max_k.

    With these, the bound for advantage k is
    P(L >= k) + sum_{l<k} P(L=l) g(k-l).
    """

    def __init__(self, recent: Pmf, future: Pmf, max_k: int):
        self.max_k = max(int(max_k), 1)
        rs = np.arange(self.max_k + 1)
        p_b = recent.values(0, self.max_k - 1)
        tail_m = tail_array(future, rs)
        tail_m[0] = 0.0
        spill = np.convolve(p_b, tail_m)[:self.max_k + 1]
        self.g = tail_array(recent, rs) + spill
        self.g[0] = 0.0

    def error(self, lead: Pmf, k: int, floor: float) -> float:
        if k <= 0:
            return 1.0
        if k > self.max_k:
            raise RangeError(f"advantage {k} beyond precomputed {self.max_k}")
        p_l = lead.values(0, k - 1)
        total = tail_from(lead, k) + float(np.dot(p_l, self.g[k:0:-1]))
        return clamp_probability(total, floor)


def clamp_probability(p: float, floor: float) -> float:
    """Report values in [floor, 1]; anything below the floor is reported as the floor."""
    return float(min(1.0, max(p, floor)))


def combine_error(lead: Pmf, recent: Pmf, future: Pmf, k: int, floor: float) -> float:
    """
    P(L >= k) + sum_{l<k} P(L=l) [P(B >= k-l) + sum_{b<k-l} P(B=b) P(M >= k-l-b)].

    The three events (L alone, L+B, L+B+M reaching k) are mutually exclusive.
    With no honest advantage (k <= 0) the target is not protected at all.
    """
    if k <= 0:
        return 1.0
    return AdvantageKernel(recent, future, k).error(lead, k, floor)


def _history_check(trace: ChainTrace, s: int, c: int, params: NetworkParams, trunc: TruncationConfig):
    if c <= s:
        raise RangeError(f"current round {c} must follow target round {s}")
    trace.require_window(s - effective_max_i_l(params, trunc), c)


def span_distributions(
    trace: ChainTrace,
    s: int,
    c: int,
    params: NetworkParams,
    trunc: TruncationConfig,
) -> SpanDistributions:
    _history_check(trace, s, c, params, trunc)
    return SpanDistributions(
        lead=lead_distribution(trace, s, params, trunc),
        recent=recent_distribution(s, c, params, trunc),
        future=future_distribution(params, trunc),
    )


def error_probability(
    trace: ChainTrace,
    s: int,
    c: int,
    params: NetworkParams,
    trunc: TruncationConfig,
) -> float:
    """
    Upper bound on the probability that the tipset at s is reorganized out,
    evaluated at round c.

    Raises:
        RangeError: If c <= s or the trace lacks history for the lead windows
    """
    spans = span_distributions(trace, s, c, params, trunc)
    k = trace.good_advantage(s, c)
    return combine_error(
        complete_at_zero(spans.lead), spans.recent, spans.future, k, trunc.early_stop_floor
    )


def report_rounds(trace: ChainTrace, settlement: int, params: NetworkParams, trunc: TruncationConfig) -> range:
    """
    Current rounds c that have a full lead history behind s = c - settlement.

    Raises:
        RangeError: If settlement < 1 or no round qualifies
    """
    if settlement < 1:
        raise RangeError(f"settlement must be at least 1, got {settlement}")
    first = trace.start_round + settlement + effective_max_i_l(params, trunc)
    rounds = range(first, trace.end_round + 1)
    if len(rounds) == 0:
        raise RangeError(
            f"trace of {len(trace)} rounds is too short for settlement {settlement} "
            f"plus {effective_max_i_l(params, trunc)} rounds of lead history"
        )
    return rounds


def map_rounds(
    evaluate: Callable[[int], ReportEntry],
    rounds: Sequence[int],
    workers: int = 1,
) -> List[ReportEntry]:
    """Evaluate rounds, optionally on a thread pool; results come back in round order."""
    if workers <= 1 or len(rounds) < 2:
        return [evaluate(c) for c in rounds]
    chunk = max(1, -(-len(rounds) // workers))
    chunks = [rounds[i:i + chunk] for i in range(0, len(rounds), chunk)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda part: [evaluate(c) for c in part], chunks))
    entries = [e for part in parts for e in part]
    entries.sort(key=lambda e: e.current_round)
    return entries


def node_report(
    trace: ChainTrace,
    settlement: int,
    params: NetworkParams,
    trunc: TruncationConfig,
    workers: int = 1,
) -> FinalityReport:
    """
    Node-view bound for every round c with enough history, at s = c - settlement.

    Raises:
        RangeError: If the trace is shorter than settlement + max_i_l rounds
    """
    rounds = report_rounds(trace, settlement, params, trunc)
    floor = trunc.early_stop_floor
    advantages: Dict[int, int] = {c: trace.good_advantage(c - settlement, c) for c in rounds}
    kernel = AdvantageKernel(
        recent_distribution(0, settlement, params, trunc),
        future_distribution(params, trunc),
        max(advantages.values()),
    )

    def evaluate(c: int) -> ReportEntry:
        s = c - settlement
        lead = complete_at_zero(lead_distribution(trace, s, params, trunc))
        return ReportEntry(
            target_round=s,
            current_round=c,
            good_advantage=advantages[c],
            error_probability=kernel.error(lead, advantages[c], floor),
            view=NODE_VIEW,
        )

    entries = map_rounds(evaluate, rounds, workers)
    logger.debug(f"Node report: settlement={settlement}, {len(entries)} rounds")
    return FinalityReport(entries)
