"""Order-preserving shaping of length-N strings onto the lowest-information length-(N+K) strings.

Strings of a given length are totally ordered by (information content,
lexicographic order). Strings of tied information are pooled across their
type classes and ordered lexicographically as one pool. ``rank`` and
``unrank`` convert between a string and its 0-based position in that order;
``shape`` is ``unrank_{N+K}(rank_N(x))``, so its image is exactly the first
``m**N`` strings of length ``N+K``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import permutations
from typing import Optional, Sequence

import numpy as np

from .cache import get_class_table
from .source_model import Ensemble, SymbolString, validate_string
from .typeclasses import EMPIRICAL, KEY_MODES, MODEL, FACTORIALS, ClassTable, TieGroup


class NotInImage(ValueError):
    """The string is not the image of any source string (a detected error)."""

    def __init__(self, y: SymbolString, rank: int, position: Optional[int]):
        self.y = y
        self.rank = rank
        self.position = position
        super().__init__(
            f"string is not in the shaped image (rank {rank}); "
            f"first infeasible position {position}"
        )


def _counts_of(x: Sequence[int], m: int) -> list[int]:
    counts = [0] * m
    for s in x:
        counts[s] += 1
    return counts


def pool_rank_terms(x: SymbolString, group: TieGroup, length: int) -> list[int]:
    """Per-position contributions to the lexicographic rank of ``x`` in the group pool.

    Position ``j`` contributes the number of pooled strings that agree with
    ``x`` before ``j`` and carry a smaller symbol at ``j``.
    """
    m = len(group.classes[0])
    alive = list(zip(group.classes, group.class_multinomials))
    c = [0] * m
    terms = []
    for j, s in enumerate(x):
        rem = length - j
        term = 0
        if s:
            total = 0
            for v, mult in alive:
                for a in range(s):
                    d = v[a] - c[a]
                    if d:
                        total += mult * d
            term = total // rem
        terms.append(term)
        cs = c[s]
        alive = [(v, mult * (v[s] - cs) // rem) for v, mult in alive if v[s] > cs]
        c[s] += 1
    if len(alive) != 1 or alive[0][1] != 1:
        raise ValueError("string does not belong to this tie group")
    return terms


def pool_rank(x: SymbolString, group: TieGroup, length: int) -> int:
    return sum(pool_rank_terms(x, group, length))


def pool_unrank(w: int, group: TieGroup, length: int) -> SymbolString:
    if not 0 <= w < group.size:
        raise IndexError(f"offset {w} outside tie group of size {group.size}")
    m = len(group.classes[0])
    alive = list(zip(group.classes, group.class_multinomials))
    c = [0] * m
    out = []
    for j in range(length):
        rem = length - j
        for a in range(m):
            ca = c[a]
            count = sum(mult * (v[a] - ca) for v, mult in alive if v[a] > ca) // rem
            if w < count:
                break
            w -= count
        out.append(a)
        alive = [(v, mult * (v[a] - ca) // rem) for v, mult in alive if v[a] > ca]
        c[a] += 1
    return tuple(out)


def pool_rank_float(xs: np.ndarray, group: TieGroup, length: int) -> np.ndarray:
    """Approximate within-group ranks of many strings at once (float64).

    The relative error is of order ``length**2 * 2**-52`` of the group size;
    callers must fall back to :func:`pool_rank` near decision boundaries.
    """
    V = group.class_array.astype(np.float64)
    mult0 = np.array([float(mu) for mu in group.class_multinomials])
    k = xs.shape[0]
    M = np.broadcast_to(mult0, (k, len(mult0))).copy()
    c = np.zeros((k, V.shape[1]))
    r = np.zeros(k)
    rows = np.arange(k)
    for j in range(length):
        rem = float(length - j)
        s = xs[:, j]
        per_symbol = (M @ V - c * M.sum(axis=1, keepdims=True)) / rem
        below = np.cumsum(per_symbol, axis=1)
        r += np.where(s > 0, below[rows, np.maximum(s - 1, 0)], 0.0)
        d = V[:, s].T - c[rows, s][:, None]
        M *= np.maximum(d, 0.0) / rem
        c[rows, s] += 1
    return r


def rank(x: Sequence[int], table: ClassTable) -> int:
    """0-based position of ``x`` in the (information, lexicographic) order."""
    x = validate_string(x, table.m)
    if len(x) != table.length:
        raise ValueError(f"string length {len(x)} does not match table length {table.length}")
    group = table.groups[table.group_index_of(_counts_of(x, table.m))]
    return group.start + pool_rank(x, group, table.length)


def unrank(i: int, table: ClassTable) -> SymbolString:
    """The string at 0-based position ``i`` of the (information, lexicographic) order."""
    if not 0 <= i < table.total:
        raise IndexError(f"index {i} outside [0, {table.total})")
    group = table.groups[table.group_at(i)]
    return pool_unrank(i - group.start, group, table.length)


@dataclass(frozen=True)
class ShapingConfig:
    """Everything that determines the shaping map: ``m``, ``N``, ``K``, the key mode and ensemble."""

    m: int
    N: int
    K: int
    key_mode: str = EMPIRICAL
    ensemble: Optional[Ensemble] = None

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("alphabet size must be at least 2")
        if self.N < 1:
            raise ValueError("source length N must be at least 1")
        if self.K < 0:
            raise ValueError("shaping order K must be non-negative")
        if self.key_mode not in KEY_MODES:
            raise ValueError(f"unknown key mode {self.key_mode!r}")
        if self.key_mode == MODEL and self.ensemble is None:
            raise ValueError("model mode requires an ensemble")
        if self.ensemble is not None and self.ensemble.m != self.m:
            raise ValueError("ensemble alphabet size does not match m")

    @property
    def table_ensemble(self) -> Optional[Ensemble]:
        return self.ensemble if self.key_mode == MODEL else None

    @cached_property
    def source_table(self) -> ClassTable:
        return get_class_table(self.m, self.N, self.key_mode, self.table_ensemble)

    @cached_property
    def target_table(self) -> ClassTable:
        return get_class_table(self.m, self.N + self.K, self.key_mode, self.table_ensemble)

    @cached_property
    def image(self) -> "ImageBoundary":
        return ImageBoundary(self.target_table, self.m**self.N)


class ImageBoundary:
    """Where the cut ``M = m**N`` falls in the target table.

    Groups ending at or before ``M`` lie wholly inside the image. At most one
    boundary group straddles the cut; inside it, the strings that are
    lexicographically smaller than ``cut_string = unrank(M)`` belong to the image.
    """

    def __init__(self, table: ClassTable, cut: int):
        self.table = table
        self.cut = cut
        self.full = cut >= table.total
        self.below = 0
        self.boundary: Optional[TieGroup] = None
        self.cut_string: Optional[SymbolString] = None
        self.cut_terms: list[int] = []
        if self.full:
            self.below = len(table.groups)
            return
        g = table.group_at(cut)
        self.below = g
        group = table.groups[g]
        if group.start < cut:
            self.boundary = group
            self.cut_string = pool_unrank(cut - group.start, group, table.length)
            self.cut_terms = pool_rank_terms(self.cut_string, group, table.length)

    @cached_property
    def below_members(self) -> np.ndarray:
        groups = self.table.groups[: self.below]
        if not groups:
            return np.zeros((0, self.table.m), dtype=np.int64)
        return np.concatenate([g.member_array for g in groups])

    def contains(self, y: SymbolString, counts: Sequence[int]) -> bool:
        if self.full:
            return True
        g = self.table.group_index_of(counts)
        if g < self.below:
            return True
        if self.boundary is not None and g == self.below:
            return y < self.cut_string
        return False


def shape(x: Sequence[int], cfg: ShapingConfig) -> SymbolString:
    x = validate_string(x, cfg.m)
    if len(x) != cfg.N:
        raise ValueError(f"source string must have length N={cfg.N}, got {len(x)}")
    if cfg.K == 0:
        return x
    return unrank(rank(x, cfg.source_table), cfg.target_table)


def _check_target(y: Sequence[int], cfg: ShapingConfig) -> SymbolString:
    y = validate_string(y, cfg.m)
    if len(y) != cfg.N + cfg.K:
        raise ValueError(f"shaped string must have length N+K={cfg.N + cfg.K}, got {len(y)}")
    return y


def is_in_image(y: Sequence[int], cfg: ShapingConfig) -> bool:
    y = _check_target(y, cfg)
    return cfg.image.contains(y, _counts_of(y, cfg.m))


def unshape(y: Sequence[int], cfg: ShapingConfig) -> SymbolString:
    """Inverse of :func:`shape`; raises :class:`NotInImage` outside the image."""
    y = _check_target(y, cfg)
    if cfg.K == 0:
        return y
    i = rank(y, cfg.target_table)
    if i >= cfg.m**cfg.N:
        raise NotInImage(y, i, first_infeasible_position(y, cfg))
    return unrank(i, cfg.source_table)


class PrefixDetector:
    """Streaming check that a received prefix can still extend to an image string.

    Feed symbols one at a time; :attr:`position` becomes the 1-based index of
    the first symbol after which no image string matches the prefix.
    Only the prefix counts and the relation of the prefix to the cut string
    are tracked.
    """

    def __init__(self, cfg: ShapingConfig):
        self.cfg = cfg
        self.image = cfg.image
        self.length = cfg.N + cfg.K
        self.orbits = self.image.table.orbits
        self.counts = np.zeros(cfg.m, dtype=np.int64)
        self.j = 0
        self.position: Optional[int] = None
        self._below = self.image.below_members
        self._below_alive = np.ones(len(self._below), dtype=bool)
        boundary = self.image.boundary
        self._edge = boundary.member_array if boundary is not None else None
        self._edge_alive = None if boundary is None else np.ones(len(self._edge), dtype=bool)
        # relation of the prefix to the cut string: 0 equal, -1 smaller, 1 larger
        self._relation = 0

    def _dominated(self, members: np.ndarray, alive: np.ndarray) -> np.ndarray:
        need = np.sort(self.counts)[::-1] if self.orbits else self.counts
        return alive & (members >= need).all(axis=1)

    def _edge_feasible(self) -> bool:
        if self._edge is None or self._relation == 1:
            return False
        if self._relation == -1:
            return bool(self._edge_alive.any())
        return sum(self.image.cut_terms[self.j:]) > 0

    @property
    def feasible(self) -> bool:
        if self.image.full:
            return True
        return bool(self._below_alive.any()) or self._edge_feasible()

    def feed(self, symbol: int) -> bool:
        if self.j >= self.length:
            raise ValueError("prefix already has full length")
        if not 0 <= symbol < self.cfg.m:
            raise ValueError(f"symbol {symbol} outside alphabet")
        if self._edge is not None and self._relation == 0:
            t = self.image.cut_string[self.j]
            if symbol != t:
                self._relation = -1 if symbol < t else 1
        self.counts[symbol] += 1
        self.j += 1
        self._below_alive = self._dominated(self._below, self._below_alive)
        if self._edge is not None:
            self._edge_alive = self._dominated(self._edge, self._edge_alive)
        ok = self.feasible
        if not ok and self.position is None:
            self.position = self.j
        return ok


def first_infeasible_position(y: Sequence[int], cfg: ShapingConfig) -> Optional[int]:
    """1-based position of the first symbol whose prefix has no image extension, else ``None``."""
    y = _check_target(y, cfg)
    detector = PrefixDetector(cfg)
    for s in y:
        if not detector.feed(s):
            break
    return detector.position


def _completions(members, counts, rem: int, orbits: bool) -> int:
    total = 0
    for member in members:
        candidates = set(permutations(member)) if orbits else (member,)
        for v in candidates:
            if all(a >= b for a, b in zip(v, counts)):
                denom = 1
                for a, b in zip(v, counts):
                    denom *= FACTORIALS[a - b]
                total += FACTORIALS[rem] // denom
    return total


def count_in_image_with_prefix(prefix: Sequence[int], cfg: ShapingConfig) -> int:
    """Exact number of image strings that begin with ``prefix``."""
    prefix = validate_string(prefix, cfg.m)
    length = cfg.N + cfg.K
    if len(prefix) > length:
        raise ValueError(f"prefix longer than N+K={length}")
    image = cfg.image
    table = image.table
    counts = _counts_of(prefix, cfg.m)
    rem = length - len(prefix)
    total = 0
    for group in table.groups[: image.below]:
        total += _completions(group.members, counts, rem, table.orbits)
    if image.boundary is not None:
        j = len(prefix)
        head = image.cut_string[:j]
        if prefix < head:
            total += _completions(image.boundary.members, counts, rem, table.orbits)
        elif prefix == head:
            total += sum(image.cut_terms[j:])
    return total
