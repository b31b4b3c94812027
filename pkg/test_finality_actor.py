#!/usr/bin/env python3
"""Tests for the actor-view calculator."""

import math

import numpy as np
import pytest
from scipy import stats

from tipset_finality.actor import (
    BpzContext,
    actor_error_probability,
    actor_lead_distribution,
    actor_recent_distribution,
    actor_report,
    actor_span_distributions,
    bpz_pmf,
    conditional_total_pmf,
)
from tipset_finality.chain import ChainTrace
from tipset_finality.config import NetworkParams, TruncationConfig
from tipset_finality.errors import DegenerateConditionError, RangeError
from tipset_finality.kernel import complete_at_zero
from tipset_finality.node import error_probability, node_report
from tipset_finality.oracle import brute_force_bpz, brute_force_error, default_t_max
from tipset_finality.simulate import SimConfig, generate_trace

FLOOR = 1e-25
PARAMS = NetworkParams()
TRUNC = TruncationConfig()


def constant_trace(rounds: int, blocks: int = 5) -> ChainTrace:
    return ChainTrace(0, (blocks,) * rounds)


class TestConditionalTotal:
    def test_zero_chain_is_plain_poisson(self):
        total = conditional_total_pmf(BpzContext(1, 0, PARAMS), TRUNC)
        assert total.offset == 0
        assert total.at(0) == pytest.approx(math.exp(-5.0), rel=1e-12)
        assert total.total() == pytest.approx(1.0, abs=1e-12)

    def test_conditioning(self):
        total = conditional_total_pmf(BpzContext(1, 5, PARAMS), TRUNC)
        assert total.offset == 5
        assert total.at(4) == 0.0
        assert total.at(5) == pytest.approx(0.313610, abs=1e-6)
        assert total.total() == pytest.approx(1.0, abs=1e-12)

    def test_implausible_chain_is_degenerate(self):
        with pytest.raises(DegenerateConditionError) as exc:
            conditional_total_pmf(BpzContext(1, 80, PARAMS), TRUNC)
        assert exc.value.chain_blocks == 80
        assert exc.value.window_rounds == 1

    def test_context_validation(self):
        with pytest.raises(RangeError):
            BpzContext(0, 5, PARAMS)
        with pytest.raises(RangeError):
            BpzContext(1, -1, PARAMS)


class TestBpz:
    def test_without_adversary_only_missing_blocks_count(self):
        params = NetworkParams(byzantine_fraction=0.0)
        bpz = bpz_pmf(BpzContext(1, 0, params), TRUNC)
        assert np.allclose(bpz.values(0, 30), stats.poisson.pmf(np.arange(31), 5.0), rtol=0, atol=1e-15)

    def test_no_extra_blocks(self):
        # T = 5 given T >= 5, and none of the five is malicious
        bpz = bpz_pmf(BpzContext(1, 5, PARAMS), TRUNC)
        assert bpz.at(0) == pytest.approx(0.313610 * 0.7**5, abs=1e-6)

    @pytest.mark.parametrize("window, chain", [(1, 0), (1, 5), (2, 3), (5, 25), (10, 62)])
    def test_matches_enumeration(self, window, chain):
        ctx = BpzContext(window, chain, PARAMS)
        fast = bpz_pmf(ctx, TRUNC)
        slow = brute_force_bpz(ctx, default_t_max(ctx))
        hi = max(fast.end, slow.end)
        assert np.max(np.abs(fast.values(0, hi) - slow.values(0, hi))) <= 1e-12
        assert fast.total() == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("window, chain", [(1, 5), (3, 12)])
    def test_range_sum_matches_enumeration(self, window, chain):
        ctx = BpzContext(window, chain, PARAMS)
        fast = bpz_pmf(ctx, TRUNC, range_sum=True)
        slow = brute_force_bpz(ctx, default_t_max(ctx), range_sum=True)
        assert fast.envelope
        hi = max(fast.end, slow.end)
        assert np.max(np.abs(fast.values(0, hi) - slow.values(0, hi))) <= 1e-12

    def test_range_sum_dominates_exact(self):
        ctx = BpzContext(4, 18, PARAMS)
        exact = bpz_pmf(ctx, TRUNC)
        wide = bpz_pmf(ctx, TRUNC, range_sum=True)
        hi = max(exact.end, wide.end)
        assert np.all(wide.values(0, hi) >= exact.values(0, hi) - 1e-15)


class TestSpans:
    def test_lead_with_empty_chain(self):
        trunc = TruncationConfig(max_i_l=1)
        lead = actor_lead_distribution(constant_trace(3, blocks=0), 2, PARAMS, trunc)
        ctx = BpzContext(2, 0, PARAMS)
        slow = brute_force_bpz(ctx, default_t_max(ctx))
        assert np.max(np.abs(lead.values(0, 40) - slow.values(0, 40))) <= 1e-12

    def test_lead_is_window_maximum(self):
        trace = constant_trace(40)
        lead = actor_lead_distribution(trace, 30, PARAMS, TRUNC)
        for k in range(0, min(lead.end, 60) + 1):
            expected = max(
                bpz_pmf(BpzContext(i + 1, 5 * (i + 1), PARAMS), TRUNC).at(5 * (i + 1) + k)
                for i in range(1, 26)
            )
            assert lead.at(k) == expected

    def test_recent(self):
        trace = ChainTrace(0, (5, 4, 6, 3, 7))
        recent = actor_recent_distribution(trace, 1, 4, PARAMS, TRUNC)
        expected = bpz_pmf(BpzContext(3, 16, PARAMS), TRUNC)
        assert np.array_equal(recent.mass, expected.mass)
        assert recent.total() <= 1 + 1e-9
        with pytest.raises(RangeError):
            actor_recent_distribution(trace, 3, 3, PARAMS, TRUNC)

    def test_history_required(self):
        with pytest.raises(RangeError):
            actor_span_distributions(constant_trace(40), 10, 15, PARAMS, TRUNC)


class TestActorError:
    def test_missing_blocks_count_without_adversary(self):
        params = NetworkParams(byzantine_fraction=0.0)
        error = actor_error_probability(constant_trace(40), 30, 35, params, TRUNC)
        assert FLOOR < error < 1.0

    def test_matches_brute_force(self):
        trace = constant_trace(40)
        s, c = 30, 35
        spans = actor_span_distributions(trace, s, c, PARAMS, TRUNC)
        lead = complete_at_zero(spans.lead)
        k = trace.good_advantage(s, c)
        expected = max(brute_force_error(lead, spans.recent, spans.future, k), FLOOR)
        assert actor_error_probability(trace, s, c, PARAMS, TRUNC) == pytest.approx(expected, abs=1e-12)

    @pytest.mark.parametrize("settlement", [3, 5, 10])
    def test_dominates_node_on_constant_chain(self, settlement):
        trace = constant_trace(50)
        c = 49
        s = c - settlement
        actor = actor_error_probability(trace, s, c, PARAMS, TRUNC)
        node = error_probability(trace, s, c, PARAMS, TRUNC)
        assert actor >= node * (1 - 1e-12)

    def test_implausible_trace_is_degenerate(self):
        with pytest.raises(DegenerateConditionError):
            actor_error_probability(constant_trace(40, blocks=80), 30, 35, PARAMS, TRUNC)


class TestActorReport:
    def test_dominates_node_on_simulated_chain(self):
        trace = generate_trace(SimConfig(fullness=0.96, rounds=120, seed=5))
        actor = actor_report(trace, 10, PARAMS, TRUNC)
        node = node_report(trace, 10, PARAMS, TRUNC)
        assert len(actor) == len(node) == 120 - 10 - 25
        for a, n in zip(actor, node):
            assert a.current_round == n.current_round
            assert a.view == "actor"
            assert a.error_probability >= n.error_probability * (1 - 1e-12)

    def test_rejects_short_trace(self):
        with pytest.raises(RangeError):
            actor_report(constant_trace(20), 5, PARAMS, TRUNC)

    def test_range_sum_is_more_conservative(self):
        trace = generate_trace(SimConfig(fullness=0.96, rounds=45, seed=9))
        exact = actor_report(trace, 6, PARAMS, TRUNC)
        wide = actor_report(trace, 6, PARAMS, TRUNC, range_sum=True)
        assert len(exact) == 45 - 6 - 25
        for e, w in zip(exact, wide):
            assert w.error_probability >= e.error_probability * (1 - 1e-12)

    def test_matches_single_round_evaluation(self):
        trace = generate_trace(SimConfig(fullness=0.96, rounds=40, seed=2))
        report = actor_report(trace, 5, PARAMS, TRUNC, workers=2)
        for entry in report:
            expected = actor_error_probability(
                trace, entry.target_round, entry.current_round, PARAMS, TRUNC
            )
            assert entry.error_probability == pytest.approx(expected, rel=1e-12, abs=1e-30)
