import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import spearmanr

from setshaping.codec import CodedMessage, MalformedStream, compare_code_lengths, decode, encode
from setshaping.shaping import ShapingConfig
from setshaping.source_model import empirical_information


def _random_strings(count, seed=0):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        m = int(rng.integers(2, 6))
        n = int(rng.integers(1, 257))
        yield tuple(int(s) for s in rng.integers(0, m, n)), m


def test_round_trip_random_strings():
    for x, m in _random_strings(1500):
        c = encode(x, m)
        assert decode(c) == x
        assert decode(CodedMessage.from_bytes(c.to_bytes())) == x


@pytest.mark.parametrize("m", [2, 3, 5, 17, 255])
@pytest.mark.parametrize("n", [1, 2, 100, 1000])
def test_round_trip_constant_and_alternating(m, n):
    for x in ((m - 1,) * n, tuple(i % m for i in range(n)), tuple(i % 2 for i in range(n))):
        assert decode(encode(x, m)) == x


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 6).flatmap(
    lambda m: st.tuples(st.just(m), st.lists(st.integers(0, m - 1), max_size=300).map(tuple))))
def test_round_trip_property(case):
    m, x = case
    assert decode(encode(x, m)) == x


def test_long_string_with_count_rescaling():
    rng = np.random.default_rng(1)
    x = tuple(int(s) for s in rng.choice(3, 70_000, p=[0.8, 0.15, 0.05]))
    c = encode(x, 3)
    assert decode(c) == x
    assert len(c) <= empirical_information(x) + 200


def test_code_length_bound():
    worst = -math.inf
    for x, m in _random_strings(800, seed=2):
        slack = len(encode(x, m)) - empirical_information(x) - m * math.log2(len(x))
        worst = max(worst, slack)
    assert worst <= 16


def test_constant_binary_string_is_short():
    assert len(encode((0,) * 100, 2)) <= 24


def test_mean_length_uniform_ternary():
    rng = np.random.default_rng(3)
    lengths = [len(encode(tuple(int(s) for s in rng.integers(0, 3, 100)), 3)) for _ in range(500)]
    assert 157 <= np.mean(lengths) <= 165


def test_empty_string():
    c = encode((), 3)
    assert c.bits == () and c.declared_length == 0
    assert decode(c) == ()
    assert decode(CodedMessage.from_bytes(bytes([3, 0, 0, 0, 0]))) == ()


def test_byte_layout():
    c = encode((0, 1, 1, 0, 2), 3)
    data = c.to_bytes()
    assert data[0] == 3
    assert int.from_bytes(data[1:5], "big") == 5
    assert len(data) == 5 + math.ceil(len(c) / 8)
    back = CodedMessage.from_bytes(data)
    assert back.bits[:len(c)] == c.bits


def test_truncated_streams_are_rejected():
    rng = np.random.default_rng(4)
    for x, m in _random_strings(300, seed=5):
        c = encode(x, m)
        if not c.bits:
            continue
        cut = int(rng.integers(0, len(c.bits)))
        try:
            out = decode(CodedMessage(c.bits[:cut], c.declared_length, m))
        except MalformedStream:
            continue
        raise AssertionError(f"truncated stream decoded to {out!r}")


def test_altered_streams_never_return_the_wrong_string_silently():
    for x, m in _random_strings(200, seed=6):
        c = encode(x, m)
        bits = list(c.bits) + [1]
        try:
            decode(CodedMessage(tuple(bits), c.declared_length, m))
        except MalformedStream:
            continue
        raise AssertionError("extended stream accepted")


def test_malformed_headers_and_inputs():
    with pytest.raises(MalformedStream):
        CodedMessage.from_bytes(b"\x03\x00")
    with pytest.raises(MalformedStream):
        CodedMessage.from_bytes(b"\x01\x00\x00\x00\x01\x00")
    with pytest.raises(MalformedStream):
        decode(CodedMessage((0, 2), 1, 3))
    with pytest.raises(ValueError):
        encode((0, 1), 1)
    with pytest.raises(ValueError):
        encode((0, 3), 3)


def test_shorter_codes_for_lower_information():
    # per-string symbol mixes spread information content across its range
    rng = np.random.default_rng(7)
    infos, lengths = [], []
    for _ in range(1000):
        p = rng.dirichlet([1, 1, 1])
        x = tuple(int(s) for s in rng.choice(3, 100, p=p))
        infos.append(empirical_information(x))
        lengths.append(len(encode(x, 3)))
    assert spearmanr(infos, lengths).statistic > 0.9


def test_compare_code_lengths():
    zero = compare_code_lengths(ShapingConfig(3, 40, 0), 200, seed=1)
    assert zero.diff == 0
    rep = compare_code_lengths(ShapingConfig(2, 100, 1), 2000, seed=1)
    assert rep.diff < 0
    assert rep == compare_code_lengths(ShapingConfig(2, 100, 1), 2000, seed=1)
    with pytest.raises(ValueError):
        compare_code_lengths(ShapingConfig(2, 10, 1), 0)
