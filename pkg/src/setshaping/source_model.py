"""Memoryless sources and the information content of symbol strings.

Symbols are integer indices ``0..m-1``. Two notions of information content
are provided:

* model information, ``-sum(log2 p(x_j))`` under a fixed ensemble;
* empirical information, ``-sum(n_a * log2(n_a / N))`` computed from the
  string's own symbol histogram (the zero-order self-information).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

SymbolString = tuple[int, ...]

PROB_SUM_TOL = 1e-12


@dataclass(frozen=True)
class Ensemble:
    """Alphabet size and symbol probabilities of a memoryless source.

    Probabilities may be floats or :class:`fractions.Fraction`; exact
    fractions are kept as given so that high-precision orderings are exact.
    """

    probs: tuple

    def __init__(self, probs: Sequence):
        probs = tuple(p if isinstance(p, Fraction) else float(p) for p in probs)
        if len(probs) < 2:
            raise ValueError("an ensemble needs at least 2 symbols")
        if any(not p > 0 for p in probs):
            raise ValueError(f"probabilities must be strictly positive: {probs}")
        if any(p > 1 for p in probs):
            raise ValueError(f"probabilities must not exceed 1: {probs}")
        if abs(math.fsum(float(p) for p in probs) - 1.0) > PROB_SUM_TOL:
            raise ValueError(f"probabilities must sum to 1: {probs}")
        object.__setattr__(self, "probs", probs)

    @classmethod
    def uniform(cls, m: int) -> "Ensemble":
        return cls([Fraction(1, m)] * m)

    @property
    def m(self) -> int:
        return len(self.probs)

    @property
    def is_uniform(self) -> bool:
        return len(set(self.probs)) == 1 or all(
            abs(float(p) - 1.0 / self.m) <= PROB_SUM_TOL for p in self.probs
        )

    def log2_probs(self) -> tuple[float, ...]:
        return tuple(math.log2(p) for p in self.probs)


@dataclass(frozen=True)
class CountVector:
    counts: tuple[int, ...]

    @property
    def total(self) -> int:
        return sum(self.counts)

    @property
    def m(self) -> int:
        return len(self.counts)


def validate_string(x: Sequence[int], m: int) -> SymbolString:
    x = tuple(int(s) for s in x)
    for s in x:
        if not 0 <= s < m:
            raise ValueError(f"symbol {s} outside alphabet of size {m}")
    return x


def entropy(e: Ensemble, base: float = 2) -> float:
    """Entropy of the ensemble, in units of ``log_base`` (bits by default)."""
    return -math.fsum(float(p) * math.log(p, base) for p in e.probs)


def model_information(x: Sequence[int], e: Ensemble) -> float:
    x = validate_string(x, e.m)
    logs = e.log2_probs()
    return -math.fsum(logs[s] for s in x)


def string_probability(x: Sequence[int], e: Ensemble) -> float:
    x = validate_string(x, e.m)
    p = 1.0
    for s in x:
        p *= float(e.probs[s])
    return p


def count_vector(x: Sequence[int], m: int) -> CountVector:
    counts = [0] * m
    for s in validate_string(x, m):
        counts[s] += 1
    return CountVector(tuple(counts))


def empirical_information_counts(counts: Sequence[int]) -> float:
    """``-sum(n log2(n/N))`` over the non-zero counts (``0 log 0 = 0``)."""
    n_total = sum(counts)
    if n_total == 0:
        return 0.0
    terms = [n * math.log2(n / n_total) for n in counts if n]
    return max(0.0, -math.fsum(terms))


def empirical_information(x: Sequence[int]) -> float:
    """Empirical (zero-order) information content of a non-empty string, in bits."""
    x = tuple(x)
    if not x:
        raise ValueError("empirical information is undefined for the empty string")
    m = max(x) + 1
    return empirical_information_counts(count_vector(x, m).counts)
