import math
from fractions import Fraction
from itertools import product

import pytest
from hypothesis import given, strategies as st

from setshaping.source_model import (
    Ensemble,
    count_vector,
    empirical_information,
    entropy,
    model_information,
    string_probability,
)

DYADIC = Ensemble([0.5, 0.25, 0.25])


def strings(max_m=5, max_len=40):
    return st.integers(2, max_m).flatmap(
        lambda m: st.tuples(st.just(m), st.lists(st.integers(0, m - 1), max_size=max_len))
    )


def test_ensemble_rejects_bad_probabilities():
    with pytest.raises(ValueError):
        Ensemble([0.5, 0.4])
    with pytest.raises(ValueError):
        Ensemble([1.0, 0.0])
    with pytest.raises(ValueError):
        Ensemble([1.0])
    Ensemble([0.5, 0.5 + 1e-13])


@pytest.mark.parametrize("e, expected", [
    (Ensemble.uniform(2), 1.0),
    (Ensemble.uniform(3), math.log2(3)),
    (DYADIC, 1.5),
])
def test_entropy(e, expected):
    assert entropy(e) == pytest.approx(expected, abs=1e-12)


def test_entropy_base_and_bounds():
    e = Ensemble([0.7, 0.2, 0.1])
    assert entropy(e, base=math.e) == pytest.approx(entropy(e) * math.log(2))
    assert 0 <= entropy(e) <= math.log2(3)


def test_model_information_examples():
    assert model_information([1] * 100, Ensemble.uniform(3)) == pytest.approx(100 * math.log2(3))
    assert model_information((0, 0, 1), DYADIC) == pytest.approx(4.0)
    assert model_information((), DYADIC) == 0.0


def test_string_probability_examples():
    assert string_probability([0, 1] * 5, Ensemble.uniform(2)) == pytest.approx(1 / 1024)
    assert string_probability((0, 0, 1), DYADIC) == pytest.approx(1 / 16)
    assert string_probability((), DYADIC) == 1.0


def test_empirical_information_examples():
    assert empirical_information((2,) * 17) == 0.0
    assert empirical_information((0, 1)) == pytest.approx(2.0)
    # counts (2, 1): -(2 log2(2/3) + log2(1/3))
    assert empirical_information((0, 0, 1)) == pytest.approx(2.75489, abs=1e-5)
    with pytest.raises(ValueError):
        empirical_information(())


def test_count_vector_examples():
    assert count_vector((0, 0, 1), 3).counts == (2, 1, 0)
    assert count_vector((), 2).counts == (0, 0)
    assert count_vector((2, 2, 2, 2), 3).counts == (0, 0, 4)
    assert count_vector((2, 2), 3).total == 2
    with pytest.raises(ValueError):
        count_vector((3,), 3)


@given(strings())
def test_uniform_model_information_is_constant(case):
    m, x = case
    assert model_information(x, Ensemble.uniform(m)) == pytest.approx(len(x) * math.log2(m), rel=1e-9)


@given(strings(max_len=60), st.lists(st.floats(0.05, 1.0), min_size=5, max_size=5))
def test_probability_matches_information(case, weights):
    m, x = case
    w = weights[:m]
    e = Ensemble([v / math.fsum(w) for v in w])
    assert string_probability(x, e) == pytest.approx(2 ** -model_information(x, e), rel=1e-9)


@given(strings(), st.randoms(use_true_random=False))
def test_empirical_information_permutation_invariant_and_bounded(case, rnd):
    m, x = case
    if not x:
        return
    y = list(x)
    rnd.shuffle(y)
    assert empirical_information(y) == empirical_information(x)
    assert empirical_information(x) <= model_information(x, Ensemble.uniform(m)) + 1e-9


@pytest.mark.parametrize("m, n", [(2, 8), (3, 8), (3, 5)])
def test_probabilities_sum_to_one(m, n):
    for e in (Ensemble.uniform(m), Ensemble([Fraction(1, 2)] + [Fraction(1, 2 * (m - 1))] * (m - 1))):
        total = math.fsum(string_probability(x, e) for x in product(range(m), repeat=n))
        assert total == pytest.approx(1.0, abs=1e-9)
