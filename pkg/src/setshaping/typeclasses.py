"""Type classes (symbol histograms) ordered by information content.

A :class:`ClassTable` lists every type class of ``A^N`` grouped into
:class:`TieGroup` objects of equal information content, sorted ascending,
with exact cumulative string counts.

Empirical mode compares classes exactly: for a fixed length ``N`` the
empirical information is ``N log2 N - log2 prod(n^n)``, so ordering by the
integer ``prod(n^n)`` (descending) is exact. All permutations of a count
vector tie, so the empirical table is built from integer partitions of ``N``
and each group stores partitions; the individual classes are expanded on
demand.

Model mode evaluates ``-sum(n_a log2 p_a)`` with 40 significant digits and
treats differences below ``1e-20`` bits as ties.
"""
from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from itertools import permutations
from typing import Iterator, Optional, Sequence

import mpmath
import numpy as np

from .source_model import CountVector, Ensemble, empirical_information_counts

EMPIRICAL = "empirical"
MODEL = "model"
KEY_MODES = (EMPIRICAL, MODEL)

DEFAULT_CAP = 10**7
MODEL_DPS = 40
MODEL_TIE_BITS = mpmath.mpf("1e-20")


class EnumerationCapExceeded(MemoryError):
    """Raised when a table would need more type classes than the configured cap."""


def _counts(cv) -> tuple[int, ...]:
    return cv.counts if isinstance(cv, CountVector) else tuple(cv)


def num_classes(m: int, n: int) -> int:
    return math.comb(n + m - 1, m - 1)


def check_cap(m: int, n: int, cap: int = DEFAULT_CAP) -> None:
    count = num_classes(m, n)
    if count > cap:
        raise EnumerationCapExceeded(
            f"{count} type classes for m={m}, N={n} exceed the cap of {cap}"
        )


def _compositions(n: int, m: int) -> Iterator[tuple[int, ...]]:
    if m == 1:
        yield (n,)
        return
    for first in range(n, -1, -1):
        for rest in _compositions(n - first, m - 1):
            yield (first,) + rest


def enumerate_classes(m: int, n: int, cap: int = DEFAULT_CAP) -> list[tuple[int, ...]]:
    """All count vectors of length ``m`` summing to ``n``, in descending lex order."""
    if m < 2 or n < 0:
        raise ValueError(f"need m >= 2 and N >= 0, got m={m}, N={n}")
    check_cap(m, n, cap)
    return list(_compositions(n, m))


def _partitions(n: int, m: int, largest: Optional[int] = None) -> Iterator[tuple[int, ...]]:
    # partitions of n into exactly m non-increasing non-negative parts
    if largest is None:
        largest = n
    if m == 0:
        if n == 0:
            yield ()
        return
    for first in range(min(n, largest), -1, -1):
        if first * m < n:
            break
        for rest in _partitions(n - first, m - 1, first):
            yield (first,) + rest


class _Factorials:
    def __init__(self):
        self._table = [1]

    def __getitem__(self, n: int) -> int:
        table = self._table
        while len(table) <= n:
            table.append(table[-1] * len(table))
        return table[n]


FACTORIALS = _Factorials()


def multinomial(cv) -> int:
    """``N! / prod(n_a!)`` as an exact integer."""
    counts = _counts(cv)
    result = FACTORIALS[sum(counts)]
    for n in counts:
        result //= FACTORIALS[n]
    return result


def exact_key(cv) -> int:
    """``prod(n^n)`` over non-zero counts; larger means less empirical information."""
    key = 1
    for n in _counts(cv):
        if n > 1:
            key *= n**n
    return key


@lru_cache(maxsize=64)
def _mp_log2_probs(ensemble: Ensemble) -> tuple:
    with mpmath.workdps(MODEL_DPS):
        out = []
        for p in ensemble.probs:
            if hasattr(p, "numerator"):
                value = mpmath.mpf(p.numerator) / p.denominator
            else:
                value = mpmath.mpf(p)
            out.append(mpmath.log(value, 2))
        return tuple(out)


def model_info_hp(cv, ensemble: Ensemble):
    """Model information ``-sum(n_a log2 p_a)`` as a 40-digit mpmath number."""
    counts = _counts(cv)
    if len(counts) != ensemble.m:
        raise ValueError("count vector and ensemble have different alphabet sizes")
    logs = _mp_log2_probs(ensemble)
    with mpmath.workdps(MODEL_DPS):
        return -mpmath.fsum(n * lp for n, lp in zip(counts, logs))


def _require_mode(mode: str, ensemble: Optional[Ensemble]) -> None:
    if mode not in KEY_MODES:
        raise ValueError(f"unknown key mode {mode!r}; expected one of {KEY_MODES}")
    if mode == MODEL and ensemble is None:
        raise ValueError("model mode requires an ensemble")


def class_info(cv, mode: str = EMPIRICAL, ensemble: Optional[Ensemble] = None) -> float:
    """Information content in bits shared by every string of the class."""
    _require_mode(mode, ensemble)
    counts = _counts(cv)
    if mode == EMPIRICAL:
        return empirical_information_counts(counts)
    return float(model_info_hp(counts, ensemble))


def compare_classes(u, v, mode: str = EMPIRICAL, ensemble: Optional[Ensemble] = None) -> int:
    """-1 if ``u`` carries less information than ``v``, 1 if more, 0 on a tie."""
    _require_mode(mode, ensemble)
    u, v = _counts(u), _counts(v)
    if sum(u) != sum(v):
        raise ValueError("classes must have equal totals to be compared")
    if mode == EMPIRICAL:
        ku, kv = exact_key(u), exact_key(v)
        return (ku < kv) - (ku > kv)
    with mpmath.workdps(MODEL_DPS):
        delta = model_info_hp(u, ensemble) - model_info_hp(v, ensemble)
        if abs(delta) < MODEL_TIE_BITS:
            return 0
        return -1 if delta < 0 else 1


def _distinct_permutations(part: tuple[int, ...]) -> set[tuple[int, ...]]:
    return set(permutations(part))


def _orbit_size(part: tuple[int, ...]) -> int:
    size = math.factorial(len(part))
    for value in set(part):
        size //= math.factorial(part.count(value))
    return size


@dataclass(frozen=True)
class TieGroup:
    """Type classes sharing one information value, pooled in lexicographic string order.

    ``members`` are count vectors, or in orbit mode the sorted partitions whose
    every permutation belongs to the group.
    """

    members: tuple[tuple[int, ...], ...]
    info: float
    size: int
    start: int
    orbits: bool = False

    @property
    def end(self) -> int:
        return self.start + self.size

    @cached_property
    def classes(self) -> tuple[tuple[int, ...], ...]:
        if not self.orbits:
            return tuple(sorted(self.members))
        out: set[tuple[int, ...]] = set()
        for part in self.members:
            out |= _distinct_permutations(part)
        return tuple(sorted(out))

    @cached_property
    def class_array(self) -> np.ndarray:
        return np.array(self.classes, dtype=np.int64)

    @cached_property
    def class_multinomials(self) -> tuple[int, ...]:
        return tuple(multinomial(v) for v in self.classes)

    @cached_property
    def member_array(self) -> np.ndarray:
        return np.array(self.members, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class ClassTable:
    m: int
    length: int
    key_mode: str
    ensemble: Optional[Ensemble]
    groups: tuple[TieGroup, ...]
    total: int
    _starts: list = field(repr=False)
    _index: dict = field(repr=False)

    @property
    def orbits(self) -> bool:
        return self.key_mode == EMPIRICAL

    def lookup_key(self, counts: Sequence[int]) -> tuple[int, ...]:
        if self.orbits:
            return tuple(sorted(counts, reverse=True))
        return tuple(counts)

    def group_index_of(self, counts: Sequence[int]) -> int:
        if len(counts) != self.m or sum(counts) != self.length:
            raise ValueError(f"count vector {tuple(counts)} does not belong to this table")
        return self._index[self.lookup_key(counts)]

    def group_at(self, rank: int) -> int:
        if not 0 <= rank < self.total:
            raise IndexError(f"rank {rank} outside [0, {self.total})")
        return bisect_right(self._starts, rank) - 1

    def __len__(self) -> int:
        return len(self.groups)


def _assemble(m, n, mode, ensemble, ordered_members, infos, orbits) -> ClassTable:
    groups = []
    index = {}
    start = 0
    for members, info in zip(ordered_members, infos):
        members = tuple(sorted(members))
        if orbits:
            size = sum(multinomial(p) * _orbit_size(p) for p in members)
        else:
            size = sum(multinomial(v) for v in members)
        for key in members:
            index[key] = len(groups)
        groups.append(TieGroup(members, info, size, start, orbits))
        start += size
    if start != m**n:
        raise AssertionError(f"class sizes sum to {start}, expected {m}**{n}")
    return ClassTable(m, n, mode, ensemble, tuple(groups), start,
                      [g.start for g in groups], index)


def build_class_table(
    m: int,
    n: int,
    mode: str = EMPIRICAL,
    ensemble: Optional[Ensemble] = None,
    cap: int = DEFAULT_CAP,
) -> ClassTable:
    """Group and sort every type class of length-``n`` strings over ``m`` symbols."""
    _require_mode(mode, ensemble)
    if m < 2 or n < 0:
        raise ValueError(f"need m >= 2 and N >= 0, got m={m}, N={n}")
    if ensemble is not None and ensemble.m != m:
        raise ValueError("ensemble alphabet size does not match m")
    check_cap(m, n, cap)

    if mode == EMPIRICAL:
        by_key: dict[int, list] = {}
        for part in _partitions(n, m):
            by_key.setdefault(exact_key(part), []).append(part)
        keys = sorted(by_key, reverse=True)
        members = [by_key[k] for k in keys]
        infos = [empirical_information_counts(ms[0]) for ms in members]
        return _assemble(m, n, mode, ensemble, members, infos, orbits=True)

    scored = sorted((model_info_hp(cv, ensemble), cv) for cv in _compositions(n, m))
    members: list[list] = []
    infos: list[float] = []
    prev = None
    with mpmath.workdps(MODEL_DPS):
        for info, cv in scored:
            if prev is not None and info - prev < MODEL_TIE_BITS:
                members[-1].append(cv)
            else:
                members.append([cv])
                infos.append(float(info))
            prev = info
    return _assemble(m, n, mode, ensemble, members, infos, orbits=False)


def table_from_members(m, n, mode, ensemble, ordered_members) -> ClassTable:
    """Rebuild a table from its ordered group members (used by the on-disk cache)."""
    _require_mode(mode, ensemble)
    if mode == EMPIRICAL:
        infos = [empirical_information_counts(ms[0]) for ms in ordered_members]
    else:
        infos = [class_info(ms[0], mode, ensemble) for ms in ordered_members]
    members = [[tuple(v) for v in ms] for ms in ordered_members]
    return _assemble(m, n, mode, ensemble, members, infos, orbits=(mode == EMPIRICAL))
