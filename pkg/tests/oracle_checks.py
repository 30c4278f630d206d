"""Compare every shaping operation with the brute-force reference for one configuration."""
import random
from itertools import product

import brute
from setshaping.shaping import (
    NotInImage,
    ShapingConfig,
    count_in_image_with_prefix,
    first_infeasible_position,
    is_in_image,
    rank,
    shape,
    unrank,
    unshape,
)
from setshaping.typeclasses import EMPIRICAL

EXHAUSTIVE_PREFIX_LIMIT = 729
SAMPLED_PREFIXES = 300


def check_config(m, n, k, mode=EMPIRICAL, ensemble=None, seed=0):
    cfg = ShapingConfig(m, n, k, mode, ensemble)
    probs = None if mode == EMPIRICAL else ensemble.probs
    src_order = brute.sorted_strings(m, n, probs)
    dst_order = brute.sorted_strings(m, n + k, probs)
    members = brute.image(m, n, k, probs)

    for i, x in enumerate(src_order):
        assert rank(x, cfg.source_table) == i
        assert unrank(i, cfg.source_table) == x
        y = shape(x, cfg)
        assert y == dst_order[i]
        assert unshape(y, cfg) == x

    for i, y in enumerate(dst_order):
        assert rank(y, cfg.target_table) == i
        assert unrank(i, cfg.target_table) == y
        inside = y in members
        assert is_in_image(y, cfg) == inside
        pos = first_infeasible_position(y, cfg)
        assert pos == brute.first_infeasible(y, m, n, k, probs)
        assert (pos is None) == inside
        if not inside:
            try:
                unshape(y, cfg)
            except NotInImage as exc:
                assert exc.position == pos
            else:
                raise AssertionError(f"unshape accepted {y}")

    counts = brute.image_prefix_counts(m, n, k, probs)
    prefixes = [p for j in range(n + k + 1) for p in product(range(m), repeat=j)]
    if len(dst_order) > EXHAUSTIVE_PREFIX_LIMIT:
        prefixes = random.Random(seed).sample(prefixes, SAMPLED_PREFIXES)
    for p in prefixes:
        assert count_in_image_with_prefix(p, cfg) == counts.get(p, 0), p
