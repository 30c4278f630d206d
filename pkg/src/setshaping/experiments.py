"""Average-information estimates, exact curves and channel-error detection runs.

Random numbers come from numpy's PCG64 generator. A Monte Carlo run of
``samples`` strings is cut into chunks of ``chunk_size``; chunk ``i`` draws
from ``PCG64(SeedSequence([seed, i]))``, so results depend only on
``(seed, samples, chunk_size)`` and not on the number of worker processes.
Per-chunk sums are exact (``math.fsum``) and combined in chunk order.
"""
from __future__ import annotations

import math
from bisect import bisect_right
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from itertools import product
from typing import Optional, Sequence

import numpy as np

from .cache import get_class_table
from .shaping import (
    ShapingConfig,
    first_infeasible_position,
    is_in_image,
    pool_rank,
    pool_rank_float,
    shape,
)
from .source_model import Ensemble
from .typeclasses import EMPIRICAL, MODEL, ClassTable

DEFAULT_SEED = 20211116
DEFAULT_CHUNK = 50_000
FLOAT_GUARD = 1e-9
TABLE1_GRID = [(m, k) for m in (2, 3, 4, 5) for k in (1, 2)]
TABLE2_KS = (1, 2, 3, 4, 5)
FIGURE1_ENSEMBLES = ((0.5, 0.3, 0.2), (0.6, 0.3, 0.1), (0.4, 0.35, 0.25))


@dataclass
class AvgInfoReport:
    m: int
    N: int
    K: int
    samples: int
    I_x: float
    I_y: float
    diff: float
    std_err_x: float
    std_err_y: float
    seed: int
    key_mode: str = EMPIRICAL

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class DetectionReport:
    m: int
    N: int
    K: int
    trials: int
    channel: str
    detected: int
    corrupted: int
    detected_rate: float
    predicted: float
    mean_first_detect_position: Optional[float]
    seed: int

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class CurveReport:
    m: int
    N: int
    Ks: tuple[int, ...]
    key_mode: str
    probs: Optional[tuple[float, ...]]
    I_x: np.ndarray
    I_y: dict[int, np.ndarray] = field(default_factory=dict)

    def below(self, K: int) -> np.ndarray:
        """Indices where the shaped string carries less information than the source string."""
        return np.flatnonzero(self.I_y[K] < self.I_x)


def sample_strings(rng: np.random.Generator, n: int, length: int, m: int,
                    ensemble: Optional[Ensemble]) -> np.ndarray:
    if ensemble is None or ensemble.is_uniform:
        return rng.integers(0, m, size=(n, length), dtype=np.int64)
    p = np.array([float(q) for q in ensemble.probs])
    return rng.choice(m, size=(n, length), p=p / p.sum())


def _histograms(xs: np.ndarray, m: int) -> np.ndarray:
    return np.stack([(xs == a).sum(axis=1) for a in range(m)], axis=1)


def _codes(keys: np.ndarray, base: int) -> np.ndarray:
    weights = base ** np.arange(keys.shape[1], dtype=np.int64)
    return keys.astype(np.int64) @ weights


@lru_cache(maxsize=None)
def _code_index(table: ClassTable) -> dict[int, int]:
    base = table.length + 1
    out = {}
    for gi, group in enumerate(table.groups):
        for code in _codes(group.member_array, base):
            out[int(code)] = gi
    return out


def group_indices(table: ClassTable, counts: np.ndarray) -> np.ndarray:
    """Tie-group index of every row of a histogram matrix."""
    keys = -np.sort(-counts, axis=1) if table.orbits else counts
    codes = _codes(keys, table.length + 1)
    uniq, inverse = np.unique(codes, return_inverse=True)
    lookup = _code_index(table)
    return np.array([lookup[int(c)] for c in uniq], dtype=np.int64)[inverse]


@lru_cache(maxsize=None)
def image_pieces(src: ClassTable, dst: ClassTable) -> tuple:
    """For each source group, the target groups its rank interval maps onto.

    Entry ``g`` is ``(offsets, infos)``: offsets (exact, relative to the source
    group start, first one 0) where each overlapping target group begins.
    """
    if dst.total < src.total:
        raise ValueError("target table is smaller than source table")
    out = []
    targets = dst.groups
    k = 0
    for group in src.groups:
        lo, hi = group.start, group.end
        while targets[k].end <= lo:
            k += 1
        offsets, infos = [], []
        kk = k
        while kk < len(targets) and targets[kk].start < hi:
            offsets.append(max(targets[kk].start, lo) - lo)
            infos.append(targets[kk].info)
            kk += 1
        out.append((tuple(offsets), np.array(infos)))
    return tuple(out)


def _classify(w: np.ndarray, xs: np.ndarray, offsets: tuple, group, length: int,
              exact_cache: dict) -> np.ndarray:
    """Piece index for each approximate within-group rank, exact near boundaries."""
    bounds = np.array([float(o) for o in offsets[1:]])
    idx = np.searchsorted(bounds, w, side="right")
    tol = FLOAT_GUARD * float(group.size)
    gap = np.full(len(w), np.inf)
    has_lo = idx > 0
    gap[has_lo] = np.abs(w[has_lo] - bounds[idx[has_lo] - 1])
    has_hi = idx < len(bounds)
    gap[has_hi] = np.minimum(gap[has_hi], np.abs(bounds[idx[has_hi]] - w[has_hi]))
    for i in np.flatnonzero(gap < tol):
        if i not in exact_cache:
            exact_cache[i] = pool_rank(tuple(int(s) for s in xs[i]), group, length)
        idx[i] = bisect_right(offsets, exact_cache[i]) - 1
    return idx


def shaped_information(xs: np.ndarray, m: int, Ks: Sequence[int], key_mode: str = EMPIRICAL,
                       ensemble: Optional[Ensemble] = None) -> tuple[np.ndarray, dict]:
    """Information of each row of ``xs`` and of its shaped image for every K.

    The image's information depends only on the target tie group that
    contains ``rank(x)``, so only the within-group rank is needed. It is
    computed in float64 for whole groups of samples at once, and exactly
    whenever it lands within ``FLOAT_GUARD`` (relative) of a target group
    boundary.
    """
    n, N = xs.shape
    table_ensemble = ensemble if key_mode == MODEL else None
    src = get_class_table(m, N, key_mode, table_ensemble)
    gidx = group_indices(src, _histograms(xs, m))
    ix = np.array([g.info for g in src.groups])[gidx]

    pieces = {K: image_pieces(src, get_class_table(m, N + K, key_mode, table_ensemble))
              for K in Ks}
    iy = {K: np.empty(n) for K in Ks}
    order = np.argsort(gidx, kind="stable")
    bounds = np.flatnonzero(np.diff(gidx[order])) + 1
    for sel in np.split(order, bounds):
        if not len(sel):
            continue
        g = int(gidx[sel[0]])
        group = src.groups[g]
        split_ks = [K for K in Ks if len(pieces[K][g][0]) > 1]
        for K in Ks:
            if K not in split_ks:
                iy[K][sel] = pieces[K][g][1][0]
        if not split_ks:
            continue
        sub = xs[sel]
        w = pool_rank_float(sub, group, N)
        exact_cache: dict = {}
        for K in split_ks:
            offsets, infos = pieces[K][g]
            iy[K][sel] = infos[_classify(w, sub, offsets, group, N, exact_cache)]
    return ix, iy


def _chunk_sums(m: int, N: int, Ks: tuple, key_mode: str, ensemble: Optional[Ensemble],
                n: int, seed: int, chunk: int) -> list:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, chunk])))
    xs = sample_strings(rng, n, N, m, ensemble)
    ix, iy = shaped_information(xs, m, Ks, key_mode, ensemble)
    out = []
    for K in Ks:
        out.append((math.fsum(ix), math.fsum(ix * ix), math.fsum(iy[K]),
                    math.fsum(iy[K] * iy[K])))
    return out


def _std_err(total: float, total_sq: float, n: int) -> float:
    if n < 2:
        return float("nan")
    var = max(0.0, (total_sq - total * total / n) / (n - 1))
    return math.sqrt(var / n)


def estimate_avg_info_grid(
    m: int,
    N: int,
    Ks: Sequence[int],
    samples: int,
    seed: int = DEFAULT_SEED,
    key_mode: str = EMPIRICAL,
    ensemble: Optional[Ensemble] = None,
    chunk_size: int = DEFAULT_CHUNK,
    workers: int = 1,
) -> list[AvgInfoReport]:
    """Monte Carlo averages of I(x) and I(shape(x)) for several K over one shared sample."""
    if samples < 1:
        raise ValueError("samples must be at least 1")
    Ks = tuple(Ks)
    if ensemble is not None and ensemble.m != m:
        raise ValueError("ensemble alphabet size does not match m")
    if key_mode == MODEL and ensemble is None:
        raise ValueError("model mode requires an ensemble")
    # build tables once in this process before any fan-out
    for K in Ks:
        ShapingConfig(m, N, K, key_mode, ensemble).target_table
    sizes = [chunk_size] * (samples // chunk_size)
    if samples % chunk_size:
        sizes.append(samples % chunk_size)
    args = [(m, N, Ks, key_mode, ensemble, size, seed, i) for i, size in enumerate(sizes)]
    if workers > 1 and len(args) > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_chunk_sums, *zip(*args)))
    else:
        results = [_chunk_sums(*a) for a in args]

    reports = []
    for k, K in enumerate(Ks):
        sx, sxx, sy, syy = (math.fsum(r[k][i] for r in results) for i in range(4))
        reports.append(AvgInfoReport(
            m=m, N=N, K=K, samples=samples,
            I_x=sx / samples, I_y=sy / samples, diff=sx / samples - sy / samples,
            std_err_x=_std_err(sx, sxx, samples), std_err_y=_std_err(sy, syy, samples),
            seed=seed, key_mode=key_mode,
        ))
    return reports


def estimate_avg_info(cfg: ShapingConfig, samples: int, seed: int = DEFAULT_SEED,
                      **kwargs) -> AvgInfoReport:
    """Monte Carlo estimate of the average information content before and after shaping."""
    return estimate_avg_info_grid(cfg.m, cfg.N, (cfg.K,), samples, seed,
                                  cfg.key_mode, cfg.ensemble, **kwargs)[0]


def exact_avg_info(cfg: ShapingConfig) -> tuple[float, float]:
    """Exact ``(I_x, I_y)`` for a uniform source, by summing over tie groups."""
    if cfg.ensemble is not None and not cfg.ensemble.is_uniform:
        raise ValueError("exact averages are only available for uniform sources")
    src, dst = cfg.source_table, cfg.target_table
    total = src.total
    ix = math.fsum(g.size / total * g.info for g in src.groups)
    terms = []
    left = total
    for g in dst.groups:
        take = min(g.size, left)
        terms.append(take / total * g.info)
        left -= take
        if not left:
            break
    return ix, math.fsum(terms)


def run_table1(samples: int = 10**6, seed: int = DEFAULT_SEED, N: int = 100,
               **kwargs) -> list[AvgInfoReport]:
    """Uniform sources with m in 2..5 and K in {1, 2}."""
    reports = []
    for m in (2, 3, 4, 5):
        ks = tuple(k for mm, k in TABLE1_GRID if mm == m)
        reports.extend(estimate_avg_info_grid(m, N, ks, samples, seed, **kwargs))
    return reports


def run_table2(samples: int = 10**7, seed: int = DEFAULT_SEED, N: int = 100,
               m: int = 3, Ks: Sequence[int] = TABLE2_KS, **kwargs) -> list[AvgInfoReport]:
    """Uniform ternary source with K from 1 to 5."""
    return estimate_avg_info_grid(m, N, tuple(Ks), samples, seed, **kwargs)


def _repeat_infos(table: ClassTable, count: int) -> np.ndarray:
    infos, sizes = [], []
    left = count
    for g in table.groups:
        take = min(g.size, left)
        infos.append(g.info)
        sizes.append(take)
        left -= take
        if not left:
            break
    return np.repeat(np.array(infos), np.array(sizes, dtype=np.int64))


def exact_curves(m: int = 3, N: int = 10, Ks: Sequence[int] = (1, 2, 3),
                 ensemble: Optional[Ensemble] = None, key_mode: str = EMPIRICAL,
                 budget: int = 10**7) -> CurveReport:
    """Information content of every source string and of its image, in shaped order."""
    if m**N > budget:
        raise ValueError(f"{m}**{N} strings exceed the enumeration budget of {budget}")
    if key_mode == MODEL and ensemble is None:
        raise ValueError("model mode requires an ensemble")
    table_ensemble = ensemble if key_mode == MODEL else None
    src = get_class_table(m, N, key_mode, table_ensemble)
    report = CurveReport(
        m=m, N=N, Ks=tuple(Ks), key_mode=key_mode,
        probs=None if ensemble is None else tuple(float(p) for p in ensemble.probs),
        I_x=_repeat_infos(src, src.total),
    )
    for K in Ks:
        dst = get_class_table(m, N + K, key_mode, table_ensemble)
        report.I_y[K] = _repeat_infos(dst, src.total)
    return report


@dataclass(frozen=True)
class Channel:
    """``single``: one uniformly placed substitution by a different uniform symbol.
    ``symmetric``: each symbol is independently replaced with probability ``epsilon``.
    """

    kind: str
    epsilon: float = 0.0

    @classmethod
    def parse(cls, text: str) -> "Channel":
        text = text.strip().lower()
        if text in ("single", "single_substitution"):
            return cls("single")
        name, _, value = text.partition(":")
        if name == "symmetric" and value:
            eps = float(value)
            if not 0.0 <= eps <= 1.0:
                raise ValueError(f"symmetric channel needs 0 <= epsilon <= 1, got {eps}")
            return cls("symmetric", eps)
        raise ValueError(f"unknown channel {text!r}; use 'single' or 'symmetric:<eps>'")

    def __str__(self) -> str:
        return "single" if self.kind == "single" else f"symmetric:{self.epsilon:g}"

    def corrupt(self, y: tuple, m: int, rng: np.random.Generator) -> tuple:
        y = list(y)
        if self.kind == "single":
            positions = [int(rng.integers(len(y)))]
        else:
            positions = np.flatnonzero(rng.random(len(y)) < self.epsilon).tolist()
        for j in positions:
            shift = int(rng.integers(1, m))
            y[j] = (y[j] + shift) % m
        return tuple(y)


def detection_experiment(cfg: ShapingConfig, trials: int, channel="single",
                         seed: int = DEFAULT_SEED) -> DetectionReport:
    """Shape random strings, corrupt them on a channel, and count detected corruptions."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if isinstance(channel, str):
        channel = Channel.parse(channel)
    rng = np.random.Generator(np.random.PCG64(seed))
    detected = corrupted = 0
    positions = []
    for _ in range(trials):
        x = tuple(int(s) for s in sample_strings(rng, 1, cfg.N, cfg.m, cfg.ensemble)[0])
        y = shape(x, cfg)
        received = channel.corrupt(y, cfg.m, rng)
        corrupted += received != y
        if not is_in_image(received, cfg):
            detected += 1
            positions.append(first_infeasible_position(received, cfg))
    return DetectionReport(
        m=cfg.m, N=cfg.N, K=cfg.K, trials=trials, channel=str(channel),
        detected=detected, corrupted=corrupted, detected_rate=detected / trials,
        predicted=cfg.K / (cfg.N + cfg.K),
        mean_first_detect_position=(sum(positions) / len(positions)) if positions else None,
        seed=seed,
    )


def detection_exhaustive(cfg: ShapingConfig) -> tuple[int, int]:
    """All single substitutions of all shaped strings: ``(events, detected)``."""
    events = detected = 0
    for x in product(range(cfg.m), repeat=cfg.N):
        y = shape(x, cfg)
        for j in range(len(y)):
            for a in range(cfg.m):
                if a == y[j]:
                    continue
                events += 1
                detected += not is_in_image(y[:j] + (a,) + y[j + 1:], cfg)
    return events, detected
