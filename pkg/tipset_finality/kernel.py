"""Discrete probability primitives shared by the node and actor calculators.

Distributions are carried as `Pmf` objects: a numpy mass vector plus the
integer at which its support starts. Everything is computed in linear double
precision; mass below the early-stop floor is dropped rather than tracked.
"""

import math
from dataclasses import dataclass
from typing import Dict, Sequence

import numpy as np
from scipy import stats

from .errors import DomainError

# Slack for float round-off when checking normalization.
MASS_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class Pmf:
    """Finite (sub-)distribution over the integers offset .. offset+len-1.

    `envelope` marks pointwise-max upper bounds, which are not required to
    sum to one.
    """

    offset: int
    mass: np.ndarray
    envelope: bool = False

    def __post_init__(self):
        mass = np.array(self.mass, dtype=float).reshape(-1)
        if mass.size == 0:
            raise DomainError("Pmf needs at least one support point")
        if not np.all(np.isfinite(mass)):
            raise DomainError("Pmf mass must be finite")
        if mass.min() < -1e-15 or mass.max() > 1 + 1e-12:
            raise DomainError("Pmf entries must lie in [0, 1]")
        mass = np.clip(mass, 0.0, 1.0)
        if not self.envelope and mass.sum() > 1 + MASS_TOLERANCE:
            raise DomainError(f"Pmf mass sums to {mass.sum():.12g} > 1")
        mass.setflags(write=False)
        object.__setattr__(self, "mass", mass)
        object.__setattr__(self, "offset", int(self.offset))

    @classmethod
    def point(cls, value: int = 0) -> "Pmf":
        """Point mass at `value`."""
        return cls(value, np.ones(1))

    def __len__(self) -> int:
        return self.mass.size

    @property
    def end(self) -> int:
        """Last integer in the support."""
        return self.offset + self.mass.size - 1

    def total(self) -> float:
        return float(self.mass.sum())

    def at(self, k: int) -> float:
        """Probability of the value k (0 outside the support)."""
        idx = k - self.offset
        if idx < 0 or idx >= self.mass.size:
            return 0.0
        return float(self.mass[idx])

    def values(self, lo: int, hi: int) -> np.ndarray:
        """Mass for every integer in [lo, hi], zero-filled outside the support."""
        out = np.zeros(max(hi - lo + 1, 0))
        start = max(lo, self.offset)
        stop = min(hi, self.end)
        if start <= stop:
            out[start - lo:stop - lo + 1] = self.mass[start - self.offset:stop - self.offset + 1]
        return out

    def to_dict(self) -> Dict:
        """Convert to dictionary for JSON serialization."""
        return {
            "offset": self.offset,
            "mass": self.mass.tolist(),
            "envelope": self.envelope,
        }


def _check_rate(rate: float):
    if not rate >= 0 or math.isinf(rate):
        raise DomainError(f"Poisson rate must be a finite non-negative number, got {rate}")


def _check_count(name: str, value: int):
    if isinstance(value, bool) or int(value) != value or value < 0:
        raise DomainError(f"{name} must be a non-negative integer, got {value}")


def _check_probability(p: float):
    if not 0 <= p <= 1:
        raise DomainError(f"p must be in [0, 1], got {p}")


def poisson_pmf_array(ks: np.ndarray, rates: np.ndarray) -> np.ndarray:
    """
    poisson_pmf broadcast over arrays of k and rate.

    Raises:
        DomainError: If any k or rate is negative, or a rate is not finite
    """
    ks = np.asarray(ks)
    rates = np.asarray(rates, dtype=float)
    if ks.size and ks.min() < 0:
        raise DomainError(f"k must be non-negative, got {ks.min()}")
    if rates.size and not (np.all(rates >= 0) and np.all(np.isfinite(rates))):
        raise DomainError("Poisson rates must be finite non-negative numbers")
    return stats.poisson.pmf(ks, rates)


def poisson_pmf(k: int, rate: float) -> float:
    """
    P(X = k) for X ~ Poisson(rate).

    Raises:
        DomainError: If k or rate is negative
    """
    _check_count("k", k)
    _check_rate(rate)
    return float(poisson_pmf_array(int(k), rate))


def poisson_tail(k: int, rate: float) -> float:
    """
    P(X >= k) for X ~ Poisson(rate).

    Raises:
        DomainError: If k or rate is negative
    """
    _check_count("k", k)
    _check_rate(rate)
    if k == 0:
        return 1.0
    return float(stats.poisson.sf(int(k) - 1, rate))


def binomial_pmf(k: int, n: int, p: float) -> float:
    """
    C(n, k) p^k (1-p)^(n-k).

    Raises:
        DomainError: If k > n, either is negative, or p is outside [0, 1]
    """
    _check_count("k", k)
    _check_count("n", n)
    if k > n:
        raise DomainError(f"k={k} exceeds n={n}")
    return float(binomial_pmf_array(int(k), int(n), p))


def _check_trials(ns: np.ndarray, p: float) -> np.ndarray:
    ns = np.asarray(ns)
    if ns.size and ns.min() < 0:
        raise DomainError(f"n must be non-negative, got {ns.min()}")
    _check_probability(p)
    return ns


def binomial_pmf_array(ks: np.ndarray, ns: np.ndarray, p: float) -> np.ndarray:
    """
    binomial_pmf broadcast over arrays of k and n; zero where k lies outside [0, n].

    Raises:
        DomainError: If any n is negative or p is outside [0, 1]
    """
    ns = _check_trials(ns, p)
    return stats.binom.pmf(ks, ns, p)


def binomial_cdf_array(ks: np.ndarray, ns: np.ndarray, p: float) -> np.ndarray:
    """P(X <= k) for X ~ Binomial(n, p), broadcast; 0 below zero and 1 from n up."""
    ns = _check_trials(ns, p)
    return stats.binom.cdf(ks, ns, p)


def early_stop_length(values: np.ndarray, floor: float, start: int = 2) -> int:
    """
    Number of leading entries kept under the early-stop rule.

    Iteration stops at the first index past `start` (and past the mode) whose
    value is below the floor and no larger than its predecessor; that entry
    and everything after it are dropped. Rising left tails that underflow to
    zero are therefore kept.
    """
    n = values.size
    if n == 0:
        return 0
    start = max(start, int(np.argmax(values)) + 1)
    if n <= start:
        return n
    tail = values[start:]
    stop = (tail < floor) & (tail <= values[start - 1:n - 1])
    hits = np.flatnonzero(stop)
    if hits.size == 0:
        return n
    return start + int(hits[0])


def poisson_cap(rate: float) -> int:
    """Support bound beyond which Poisson(rate) mass is far below 1e-25."""
    return int(math.ceil(rate + 12.0 * math.sqrt(rate) + 40.0))


def poisson_distribution(rate: float, max_k: int, floor: float) -> Pmf:
    """Poisson(rate) over [0, max_k], early-stopped below the floor past the mode."""
    _check_rate(rate)
    mass = poisson_pmf_array(np.arange(max_k + 1), rate)
    return Pmf(0, mass[:early_stop_length(mass, floor)])


def pmf_convolve(a: Pmf, b: Pmf, negate_b: bool = False) -> Pmf:
    """
    Distribution of A + B, or of A - B when `negate_b` is set.

    Offsets are carried through, so supports may extend below zero.
    """
    if negate_b:
        b_mass = b.mass[::-1]
        b_offset = -b.end
    else:
        b_mass = b.mass
        b_offset = b.offset
    mass = np.convolve(a.mass, b_mass)
    return Pmf(a.offset + b_offset, np.clip(mass, 0.0, 1.0), envelope=a.envelope or b.envelope)


def skellam_pmf(mu1: float, mu2: float, floor: float) -> Pmf:
    """Skellam(mu1, mu2) as Poisson(mu1) convolved with a negated Poisson(mu2)."""
    a = poisson_distribution(mu1, poisson_cap(mu1), floor)
    b = poisson_distribution(mu2, poisson_cap(mu2), floor)
    return pmf_convolve(a, b, negate_b=True)


def pointwise_max_envelope(pmfs: Sequence[Pmf]) -> Pmf:
    """
    Entry-wise maximum of several pmfs.

    The result bounds every input from above and is left unnormalized.

    Raises:
        DomainError: If `pmfs` is empty
    """
    if not pmfs:
        raise DomainError("envelope of an empty list")
    lo = min(p.offset for p in pmfs)
    hi = max(p.end for p in pmfs)
    stacked = np.vstack([p.values(lo, hi) for p in pmfs])
    return Pmf(lo, stacked.max(axis=0), envelope=True)


def _reverse_cumsum(mass: np.ndarray) -> np.ndarray:
    return np.cumsum(mass[::-1])[::-1]


def tail_array(pmf: Pmf, ks: Sequence[int]) -> np.ndarray:
    """tail_from(pmf, k) for every k in `ks`."""
    ks = np.asarray(ks, dtype=int)
    tails = np.append(_reverse_cumsum(pmf.mass), 0.0)
    idx = np.clip(ks - pmf.offset, 0, pmf.mass.size)
    return np.clip(tails[idx], 0.0, 1.0)


def tail_from(pmf: Pmf, k: int) -> float:
    """Mass at or above k, clamped to [0, 1]."""
    return float(tail_array(pmf, np.array([k]))[0])


def complete_at_zero(pmf: Pmf) -> Pmf:
    """
    Put the residual mass 1 - sum of a non-negative envelope on the value 0.

    Raises:
        DomainError: If the support reaches below zero
    """
    if pmf.offset < 0:
        raise DomainError("complete_at_zero needs non-negative support")
    mass = pmf.values(0, pmf.end)
    residual = 1.0 - float(mass.sum())
    if residual > 0:
        mass[0] = min(1.0, mass[0] + residual)
    return Pmf(0, mass, envelope=True)
