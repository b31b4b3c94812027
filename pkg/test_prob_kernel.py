#!/usr/bin/env python3
"""Tests for the discrete probability primitives."""

import math

import numpy as np
import pytest
from scipy import special, stats

from tipset_finality.errors import DomainError
from tipset_finality.kernel import (
    Pmf,
    binomial_cdf_array,
    binomial_pmf,
    binomial_pmf_array,
    complete_at_zero,
    early_stop_length,
    pmf_convolve,
    pointwise_max_envelope,
    poisson_distribution,
    poisson_pmf,
    poisson_pmf_array,
    poisson_tail,
    skellam_pmf,
    tail_array,
    tail_from,
)

FLOOR = 1e-25


def series_poisson(k: int, rate: float) -> float:
    """e^-rate rate^k / k! by repeated multiplication."""
    term = math.exp(-rate)
    for j in range(1, k + 1):
        term *= rate / j
    return term


def test_poisson_pmf_values():
    assert poisson_pmf(0, 0.0) == 1.0
    assert poisson_pmf(0, 1.5) == pytest.approx(math.exp(-1.5), rel=1e-12)
    assert poisson_pmf(2, 1.5) == pytest.approx(0.2510214, abs=1e-7)


@pytest.mark.parametrize("rate", [0.5, 1.5, 7.3, 20.0, 50.0])
def test_poisson_pmf_matches_series(rate):
    for k in range(201):
        assert abs(poisson_pmf(k, rate) - series_poisson(k, rate)) <= 1e-12


def test_poisson_pmf_large_arguments_do_not_overflow():
    value = poisson_pmf(400, 1000.0)
    assert 0.0 <= value < 1e-50
    assert math.isfinite(poisson_pmf(1000, 1000.0))


def test_poisson_tail_values():
    assert poisson_tail(0, 3.7) == 1.0
    assert poisson_tail(1, 0.0) == 0.0
    oracle = 1.0 - sum(series_poisson(j, 1.5) for j in range(3))
    assert poisson_tail(3, 1.5) == pytest.approx(oracle, abs=1e-12)
    assert poisson_tail(3, 1.5) == pytest.approx(0.1912, abs=1e-4)


@pytest.mark.parametrize("call", [
    lambda: poisson_pmf(-1, 1.0),
    lambda: poisson_pmf(1, -0.5),
    lambda: poisson_tail(2, -1.0),
    lambda: binomial_pmf(1, 0, 0.5),
    lambda: binomial_pmf(1, 3, 1.5),
])
def test_domain_errors(call):
    with pytest.raises(DomainError):
        call()


def test_binomial_pmf_values():
    assert binomial_pmf(0, 5, 0.3) == pytest.approx(0.16807, rel=1e-12)
    assert binomial_pmf(5, 5, 1.0) == 1.0
    assert binomial_pmf(2, 4, 0.5) == pytest.approx(6 / 16, rel=1e-12)


def test_poisson_pmf_array_broadcasts():
    ks = np.arange(12)
    rates = np.array([0.0, 1.5, 7.3])
    grid = poisson_pmf_array(ks[None, :] + np.array([0, 3, 5])[:, None], rates[:, None])
    assert grid.shape == (3, 12)
    for row, (shift, rate) in enumerate(zip((0, 3, 5), rates)):
        for k in ks:
            assert grid[row, k] == pytest.approx(series_poisson(k + shift, rate), abs=1e-14)


def test_binomial_arrays():
    ks = np.arange(-2, 8)
    pmf = binomial_pmf_array(ks, 5, 0.3)
    assert np.all(pmf[ks < 0] == 0.0)
    assert np.all(pmf[ks > 5] == 0.0)
    assert pmf[ks >= 0][:6].sum() == pytest.approx(1.0, abs=1e-14)
    assert pmf[2 + 2] == pytest.approx(binomial_pmf(2, 5, 0.3), rel=1e-12)

    cdf = binomial_cdf_array(ks, 5, 0.3)
    assert np.all(cdf[ks < 0] == 0.0)
    assert np.allclose(cdf[ks >= 5], 1.0, rtol=0, atol=1e-14)
    assert np.allclose(np.diff(cdf), pmf[1:], rtol=0, atol=1e-14)


@pytest.mark.parametrize("call", [
    lambda: poisson_pmf_array(np.array([0, -1]), 1.0),
    lambda: poisson_pmf_array(np.arange(3), np.array([1.0, -0.5, 2.0])),
    lambda: poisson_pmf_array(np.arange(3), np.inf),
    lambda: binomial_pmf_array(np.arange(3), np.array([2, -1, 4]), 0.5),
    lambda: binomial_cdf_array(np.arange(3), 4, -0.1),
])
def test_array_domain_errors(call):
    with pytest.raises(DomainError):
        call()


def test_pmf_rejects_bad_mass():
    with pytest.raises(DomainError):
        Pmf(0, [])
    with pytest.raises(DomainError):
        Pmf(0, [0.5, -0.1])
    with pytest.raises(DomainError):
        Pmf(0, [0.7, 0.7])
    # envelopes may exceed one in total
    assert Pmf(0, [0.7, 0.7], envelope=True).total() == pytest.approx(1.4)


def test_pmf_values_zero_fill():
    p = Pmf(-2, [0.25, 0.5, 0.25])
    assert p.end == 0
    assert p.values(-3, 1).tolist() == [0.0, 0.25, 0.5, 0.25, 0.0]
    assert p.at(-1) == 0.5
    assert p.at(5) == 0.0


def test_convolve_identity():
    p = poisson_distribution(2.5, 100, FLOOR)
    q = pmf_convolve(Pmf.point(0), p)
    assert q.offset == p.offset
    assert np.array_equal(q.mass, p.mass)


def test_skellam_with_zero_second_rate_is_poisson():
    p = poisson_distribution(1.0, 100, FLOOR)
    q = skellam_pmf(1.0, 0.0, FLOOR)
    assert np.allclose(q.values(0, p.end), p.mass, rtol=0, atol=1e-15)
    assert q.values(q.offset, -1).sum() == 0.0


def test_skellam_zero_matches_bessel():
    q = skellam_pmf(2.0, 3.0, FLOOR)
    expected = math.exp(-5.0) * special.iv(0, 2 * math.sqrt(6.0))
    assert q.at(0) == pytest.approx(expected, abs=1e-10)


def test_skellam_negative_support():
    q = skellam_pmf(1.0, 4.0, FLOOR)
    assert q.offset < 0
    assert q.total() == pytest.approx(1.0, abs=1e-9)
    assert q.at(-3) == pytest.approx(stats.skellam.pmf(-3, 1.0, 4.0), abs=1e-10)


def test_convolve_commutative_and_associative():
    a = Pmf(-1, [0.2, 0.5, 0.3])
    b = Pmf(2, [0.6, 0.4])
    c = Pmf(0, [0.1, 0.1, 0.3, 0.5])

    ab = pmf_convolve(a, b)
    ba = pmf_convolve(b, a)
    assert ab.offset == ba.offset
    assert np.allclose(ab.mass, ba.mass, rtol=0, atol=1e-12)

    left = pmf_convolve(ab, c)
    right = pmf_convolve(a, pmf_convolve(b, c))
    assert left.offset == right.offset
    assert np.allclose(left.mass, right.mass, rtol=0, atol=1e-12)


def test_convolve_negated_offsets():
    a = Pmf(0, [0.5, 0.5])
    b = Pmf(1, [0.25, 0.75])
    d = pmf_convolve(a, b, negate_b=True)
    # A - B ranges over [0-2, 1-1]
    assert d.offset == -2
    assert d.values(-2, 0).tolist() == pytest.approx([0.375, 0.5, 0.125])


def test_envelope_properties():
    p = poisson_distribution(3.0, 50, FLOOR)
    q = Pmf(-2, [0.1, 0.2, 0.3, 0.4])

    assert np.array_equal(pointwise_max_envelope([p]).mass, p.mass)
    same = pointwise_max_envelope([p, p])
    assert same.offset == p.offset
    assert np.array_equal(same.mass, p.mass)

    env = pointwise_max_envelope([p, q])
    assert env.envelope
    for k in range(env.offset, env.end + 1):
        assert env.at(k) >= p.at(k)
        assert env.at(k) >= q.at(k)

    with pytest.raises(DomainError):
        pointwise_max_envelope([])


def test_tail_from():
    p = poisson_distribution(1.5, 400, FLOOR)
    assert tail_from(p, p.offset) == pytest.approx(p.total(), rel=1e-12)
    assert tail_from(p, p.end + 1) == 0.0
    assert tail_from(p, -10) == pytest.approx(p.total(), rel=1e-12)
    assert tail_from(p, 3) == pytest.approx(poisson_tail(3, 1.5), abs=1e-12)


def test_tail_non_increasing():
    p = skellam_pmf(1.5, 1.95, FLOOR)
    tails = tail_array(p, np.arange(p.offset - 2, p.end + 3))
    assert np.all(np.diff(tails) <= 0)


def test_tail_clamped_for_envelopes():
    env = Pmf(0, [0.8, 0.8], envelope=True)
    assert tail_from(env, 0) == 1.0


def test_truncated_poisson_is_normalized():
    for rate in (0.0, 1.5, 45.0, 150.0):
        p = poisson_distribution(rate, 400, FLOOR)
        assert abs(p.total() - 1.0) <= 1e-9


def test_early_stop_rule():
    assert early_stop_length(np.array([0.5, 0.3, 1e-30, 1e-31]), FLOOR) == 2
    assert early_stop_length(np.array([0.5, 0.3, 0.1]), FLOOR) == 3
    # rising left tail below the floor is kept up to the mode
    rising = np.array([0.0, 0.0, 0.0, 1e-3, 0.5, 0.2, 1e-30, 0.0])
    assert early_stop_length(rising, FLOOR) == 6


def test_complete_at_zero():
    p = complete_at_zero(Pmf(0, [0.1, 0.2], envelope=True))
    assert p.mass.tolist() == pytest.approx([0.8, 0.2])

    over = Pmf(0, [0.3, 0.9], envelope=True)
    assert np.array_equal(complete_at_zero(over).mass, over.mass)

    with pytest.raises(DomainError):
        complete_at_zero(Pmf(-1, [0.5, 0.5]))
