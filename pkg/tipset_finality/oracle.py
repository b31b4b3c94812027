"""Independent oracles for the calculators.

Nothing here builds distributions with the calculator's own kernel: the
Poisson, binomial and Skellam values below come from `math` series, and the
lead process is sampled directly. The checks in `run_validation` compare the
two paths.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from .actor import BpzContext, bpz_pmf
from .chain import ChainTrace
from .config import CalculatorConfig, NetworkParams
from .errors import RangeError
from .kernel import Pmf, complete_at_zero, skellam_pmf, tail_from
from .node import combine_error, lead_distribution, span_distributions
from .simulate import derive_seed

logger = logging.getLogger("tipset_finality")

TRIAL_CHUNK = 20_000
DEFAULT_HISTORY_DEPTH = 25


@dataclass
class TrialStats:
    """Monte-Carlo counts of {lead >= k}."""

    trials: int
    tail_counts: Dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be positive")
        previous = self.trials
        for k in sorted(self.tail_counts):
            count = self.tail_counts[k]
            if count > previous:
                raise ValueError(f"tail count at {k} exceeds the count below it")
            previous = count

    def frequency(self, k: int) -> float:
        if k <= 0:
            return 1.0
        return self.tail_counts.get(k, 0) / self.trials

    def standard_error(self, k: int) -> float:
        p = self.frequency(k)
        return math.sqrt(p * (1.0 - p) / self.trials)

    def to_dict(self) -> Dict:
        """Convert to dictionary for JSON serialization."""
        return asdict(self)


def _walk_chunk(counts: np.ndarray, rate: float, trials: int, seed: np.random.SeedSequence) -> np.ndarray:
    rng = np.random.default_rng(seed)
    leads = np.zeros(trials, dtype=np.int64)
    for blocks in counts:
        leads = np.maximum(0, leads + rng.poisson(rate, trials) - blocks)
    return np.bincount(leads)


def simulate_lead_process(
    trace: ChainTrace,
    s: int,
    params: NetworkParams,
    trials: int,
    seed: int,
    history_depth: int = DEFAULT_HISTORY_DEPTH,
    workers: int = 1,
) -> TrialStats:
    """
    Sample the adversary's private lead at round s.

    Each trial walks rounds s - history_depth .. s, adding Poisson(f e)
    adversarial blocks and subtracting the chain's blocks, reflecting at 0.
    Trials run in fixed chunks with child seeds, so the result does not
    depend on `workers`.

    Raises:
        RangeError: If the trace does not cover the walk
    """
    if trials < 1:
        raise RangeError(f"trials must be positive, got {trials}")
    trace.require_window(s - history_depth, s)
    first = s - history_depth - trace.start_round
    counts = np.asarray(trace.counts[first:first + history_depth + 1], dtype=np.int64)

    sizes = [TRIAL_CHUNK] * (trials // TRIAL_CHUNK)
    if trials % TRIAL_CHUNK:
        sizes.append(trials % TRIAL_CHUNK)
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    jobs = list(zip(sizes, children))

    def run(job):
        size, child = job
        return _walk_chunk(counts, params.adversary_rate, size, child)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            histograms = list(pool.map(run, jobs))
    else:
        histograms = [run(job) for job in jobs]

    width = max(h.size for h in histograms)
    hist = np.zeros(width, dtype=np.int64)
    for h in histograms:
        hist[:h.size] += h
    tails = np.cumsum(hist[::-1])[::-1]
    return TrialStats(trials, {k: int(tails[k]) for k in range(1, width)})


def _log_poisson(k: int, rate: float) -> float:
    if rate == 0:
        return 0.0 if k == 0 else -math.inf
    return k * math.log(rate) - rate - math.lgamma(k + 1)


def _poisson(k: int, rate: float) -> float:
    return math.exp(_log_poisson(k, rate))


def _binomial(b: int, t: int, f: float) -> float:
    return math.comb(t, b) * f**b * (1.0 - f) ** (t - b)


def default_t_max(ctx: BpzContext) -> int:
    """Enumeration bound leaving Poisson mass far below 1e-18 unvisited."""
    rate = ctx.production_rate
    return int(max(ctx.chain_blocks, rate) + 15 * math.sqrt(rate) + 60)


def brute_force_bpz(ctx: BpzContext, t_max: int, range_sum: bool = False) -> Pmf:
    """
    Enumerate totals t in [chain, t_max] and malicious counts b in [0, t].

    Each (t, b) adds P(T=t | T >= chain) Binomial(b; t, f) to the bin
    b + (t - chain), or to every bin in [b, b + t - chain] with `range_sum`.
    """
    rate = ctx.production_rate
    chain = ctx.chain_blocks
    f = ctx.params.byzantine_fraction
    totals = [_poisson(t, rate) for t in range(chain, t_max + 1)]
    condition = sum(reversed(totals))
    # beyond t_max the Poisson terms are below double-precision relevance
    for t in range(t_max + 1, t_max + 200):
        term = _poisson(t, rate)
        condition += term
        if term < 1e-300:
            break

    bins = [0.0] * (2 * t_max - chain + 1)
    for t, weight in zip(range(chain, t_max + 1), totals):
        p_t = weight / condition
        z = t - chain
        for b in range(t + 1):
            mass = p_t * _binomial(b, t, f)
            if range_sum:
                for k in range(b, b + z + 1):
                    bins[k] += mass
            else:
                bins[b + z] += mass
    return Pmf(0, np.clip(np.array(bins), 0.0, 1.0), envelope=range_sum)


def brute_force_error(lead: Pmf, recent: Pmf, future: Pmf, k: int) -> float:
    """
    P(L >= k) + sum_{l<k} P(L=l) [P(B >= k-l) + sum_{b<k-l} P(B=b) P(M >= k-l-b)],
    summed term by term.

    Raises:
        RangeError: If k < 1
    """
    if k < 1:
        raise RangeError(f"advantage must be at least 1, got {k}")

    def tail(pmf: Pmf, q: int) -> float:
        total = 0.0
        for j in range(max(q, pmf.offset), pmf.end + 1):
            total += pmf.at(j)
        return min(1.0, total)

    future_tails = {q: tail(future, q) for q in range(1, k + 1)}
    total = tail(lead, k)
    for l in range(k):
        inner = tail(recent, k - l)
        for b in range(k - l):
            inner += recent.at(b) * future_tails[k - l - b]
        total += lead.at(l) * inner
    return min(1.0, total)


def bessel_skellam(k: int, mu1: float, mu2: float) -> float:
    """
    P(X - Y = k) for X ~ Poisson(mu1), Y ~ Poisson(mu2), from the series
    e^-(mu1+mu2) (mu1/mu2)^(k/2) I_|k|(2 sqrt(mu1 mu2)) summed in log space.
    """
    if k < 0:
        return bessel_skellam(-k, mu2, mu1)
    if mu2 == 0:
        return _poisson(k, mu1)
    if mu1 == 0:
        return math.exp(-mu2) if k == 0 else 0.0

    terms = int(mu1 + mu2 + 20 * math.sqrt(mu1 + mu2) + 60)
    logs = [
        (m + k) * math.log(mu1) + m * math.log(mu2)
        - math.lgamma(m + 1) - math.lgamma(m + k + 1)
        for m in range(terms)
    ]
    peak = max(logs)
    return math.exp(peak - mu1 - mu2) * math.fsum(math.exp(x - peak) for x in logs)


@dataclass
class CheckResult:
    """Outcome of one oracle comparison."""

    name: str
    passed: bool
    max_delta: float
    tolerance: float
    detail: str = ""

    def to_dict(self) -> Dict:
        """Convert to dictionary for JSON serialization."""
        return asdict(self)


def _bpz_grid(params: NetworkParams) -> List[Tuple[int, int]]:
    grid = []
    for window in (1, 2, 5, 10):
        mean = window * params.blocks_per_round_target
        for chain in (0, int(0.5 * mean), int(mean), int(1.2 * mean) + 2):
            pair = (window, min(chain, 60))
            if pair not in grid:
                grid.append(pair)
    return grid


def check_bpz_grid(config: CalculatorConfig, inject_fault: bool = False) -> CheckResult:
    tolerance = 1e-12
    trunc = config.truncation
    worst = 0.0
    worst_at = None
    for window, chain in _bpz_grid(config.network):
        ctx = BpzContext(window, chain, config.network)
        fast = bpz_pmf(ctx, trunc)
        slow = brute_force_bpz(ctx, default_t_max(ctx))
        hi = max(fast.end, slow.end)
        produced = fast.values(0, hi)
        if inject_fault:
            produced[int(np.argmax(produced))] += 1e-6
        delta = float(np.max(np.abs(produced - slow.values(0, hi))))
        if delta > worst:
            worst, worst_at = delta, (window, chain)
    return CheckResult(
        "bpz-grid", worst <= tolerance, worst, tolerance,
        f"worst window/chain: {worst_at}" if worst_at else "",
    )


def check_error_combination(config: CalculatorConfig, seed: int, cases: int = 50) -> CheckResult:
    tolerance = 1e-12
    rng = np.random.default_rng(derive_seed(seed, 1))
    trunc = config.truncation
    history = min(trunc.max_i_l, config.network.history_window)
    worst = 0.0
    for case in range(cases):
        params = config.network.model_copy(update={
            "byzantine_fraction": float(rng.uniform(0.05, 0.4)),
        })
        settlement = int(rng.integers(1, 13))
        rate = float(rng.uniform(0.6, 1.1)) * params.blocks_per_round_target
        counts = rng.poisson(rate, history + settlement + 1)
        trace = ChainTrace(0, tuple(int(c) for c in counts))
        c = trace.end_round
        s = c - settlement
        k = trace.good_advantage(s, c)
        if k < 1:
            continue
        spans = span_distributions(trace, s, c, params, trunc)
        lead = complete_at_zero(spans.lead)
        fast = combine_error(lead, spans.recent, spans.future, k, trunc.early_stop_floor)
        slow = max(brute_force_error(lead, spans.recent, spans.future, k), trunc.early_stop_floor)
        worst = max(worst, abs(fast - slow))
    return CheckResult("error-combination", worst <= tolerance, worst, tolerance, f"{cases} cases")


def check_skellam(config: CalculatorConfig) -> CheckResult:
    tolerance = 1e-10
    floor = config.truncation.early_stop_floor
    worst = 0.0
    for mu1, mu2 in ((2.0, 3.0), (1.5, 1.9469), (0.5, 4.0), (15.0, 29.2), (1.0, 0.0)):
        fast = skellam_pmf(mu1, mu2, floor)
        for k in range(fast.offset, fast.end + 1):
            worst = max(worst, abs(fast.at(k) - bessel_skellam(k, mu1, mu2)))
    return CheckResult("skellam-bessel", worst <= tolerance, worst, tolerance)


def check_lead_monte_carlo(config: CalculatorConfig, trials: int, seed: int) -> CheckResult:
    """
    Empirical P(lead >= k) against the lead envelope on a constant trace at
    the target rate, for k >= 1 with frequency at least 1e-3. The envelope
    includes the single-round window, which the walk's last step realizes.
    """
    depth = min(config.truncation.max_i_l, config.network.history_window)
    blocks = int(round(config.network.blocks_per_round_target))
    trace = ChainTrace(0, (blocks,) * (depth + 1))
    s = trace.end_round
    trunc = config.truncation.model_copy(update={"min_i_l": 0, "max_i_l": depth})

    worst = -math.inf
    checked = 0
    for i, f in enumerate((0.1, 0.2, 0.3)):
        params = config.network.model_copy(update={"byzantine_fraction": f})
        stats = simulate_lead_process(
            trace, s, params, trials, derive_seed(seed, 2, i),
            history_depth=depth, workers=config.workers,
        )
        envelope = lead_distribution(trace, s, params, trunc)
        for k in sorted(stats.tail_counts):
            if stats.frequency(k) < 1e-3:
                break
            excess = stats.frequency(k) - tail_from(envelope, k) - 3 * stats.standard_error(k)
            worst = max(worst, excess)
            checked += 1
    if checked == 0:
        worst = 0.0
    return CheckResult(
        "lead-monte-carlo", worst <= 0.0, worst, 0.0,
        f"{trials} trials, {checked} tail points",
    )


def run_validation(
    config: CalculatorConfig,
    trials: int = 100_000,
    seed: int = 0,
    inject_fault: bool = False,
) -> List[CheckResult]:
    """Run every oracle comparison; `inject_fault` perturbs one bpz entry by 1e-6."""
    results = [
        check_bpz_grid(config, inject_fault),
        check_error_combination(config, seed),
        check_skellam(config),
        check_lead_monte_carlo(config, trials, seed),
    ]
    for r in results:
        level = logging.INFO if r.passed else logging.ERROR
        logger.log(level, f"{r.name}: {'ok' if r.passed else 'FAILED'} (max delta {r.max_delta:.3e})")
    return results
