"""Adaptive order-0 arithmetic coding of symbol strings.

The coder is a 32-bit carry-less range coder (Subbotin-style renormalisation:
a byte is shifted out when the top bytes of ``low`` and ``low + range``
agree, and ``range`` is clipped to the next 16-bit boundary when it falls
below ``2**16``). Symbol frequencies follow a Laplace (+1) adaptive model;
counts are halved if the total would reach ``2**16``.

Termination writes the shortest bit string whose dyadic interval lies inside
the final coding interval, so no codeword is a prefix of another codeword
for the same declared length. Decoding re-encodes its result and rejects
any payload that is not exactly that codeword (up to zero padding to a byte
boundary); truncated or altered streams raise :class:`MalformedStream`.

Serialised layout (big-endian)::

    byte 0      alphabet size m (2..255)
    bytes 1-4   declared length in symbols (uint32)
    bytes 5-    payload bits, MSB first, zero-padded to a whole byte
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .experiments import sample_strings
from .shaping import ShapingConfig, shape
from .source_model import validate_string

TOP = 1 << 24
BOT = 1 << 16
MASK = (1 << 32) - 1
HEADER = struct.Struct(">BI")


class MalformedStream(ValueError):
    pass


@dataclass(frozen=True)
class CodedMessage:
    bits: tuple[int, ...]
    declared_length: int
    m: int

    def __len__(self) -> int:
        return len(self.bits)

    def to_bytes(self) -> bytes:
        padded = list(self.bits) + [0] * (-len(self.bits) % 8)
        payload = bytes(
            int("".join(map(str, padded[i:i + 8])), 2) for i in range(0, len(padded), 8)
        )
        return HEADER.pack(self.m, self.declared_length) + payload

    @classmethod
    def from_bytes(cls, data: bytes) -> "CodedMessage":
        if len(data) < HEADER.size:
            raise MalformedStream("message shorter than its header")
        m, length = HEADER.unpack_from(data)
        if m < 2:
            raise MalformedStream(f"invalid alphabet size {m}")
        bits = tuple(int(b) for byte in data[HEADER.size:] for b in f"{byte:08b}")
        return cls(bits, length, m)


class _LaplaceModel:
    def __init__(self, m: int):
        self.freq = [1] * m
        self.total = m

    def interval(self, s: int) -> tuple[int, int]:
        return sum(self.freq[:s]), self.freq[s]

    def find(self, target: int) -> tuple[int, int, int]:
        cum = 0
        for s, f in enumerate(self.freq):
            if target < cum + f:
                return s, cum, f
            cum += f
        raise MalformedStream("code value outside the model range")

    def update(self, s: int) -> None:
        self.freq[s] += 1
        self.total += 1
        if self.total >= BOT:
            self.freq = [(f + 1) // 2 for f in self.freq]
            self.total = sum(self.freq)


def _shortest_codeword(prefix: bytes, low: int, rng: int) -> tuple[int, ...]:
    depth = 8 * len(prefix) + 32
    lo = (int.from_bytes(prefix, "big") << 32) + low
    hi = lo + rng
    for k in range(depth + 1):
        shift = depth - k
        v = -(-lo >> shift)
        if (v + 1) << shift <= hi:
            return tuple((v >> (k - 1 - i)) & 1 for i in range(k))
    raise AssertionError("empty coding interval")


def encode(x: Sequence[int], m: int) -> CodedMessage:
    """Arithmetic-code ``x`` with an adaptive Laplace model over ``m`` symbols."""
    if not 2 <= m <= 255:
        raise ValueError("alphabet size must be between 2 and 255")
    x = validate_string(x, m)
    if len(x) > MASK:
        raise ValueError("string too long for a 32-bit length header")
    if not x:
        return CodedMessage((), 0, m)
    model = _LaplaceModel(m)
    low, rng = 0, MASK
    out = bytearray()
    for s in x:
        cum, freq = model.interval(s)
        r = rng // model.total
        low += cum * r
        rng = freq * r
        while True:
            if (low ^ (low + rng)) < TOP:
                pass
            elif rng < BOT:
                rng = -low & (BOT - 1)
            else:
                break
            out.append(low >> 24)
            low = (low << 8) & MASK
            rng = (rng << 8) & MASK
        model.update(s)
    return CodedMessage(_shortest_codeword(bytes(out), low, rng), len(x), m)


def _decode_symbols(c: CodedMessage) -> tuple[int, ...]:
    nbytes = -(-len(c.bits) // 8)
    padded = list(c.bits) + [0] * (8 * nbytes - len(c.bits))
    data = [int("".join(map(str, padded[i:i + 8])), 2) for i in range(0, len(padded), 8)]
    pos = 0

    def next_byte() -> int:
        nonlocal pos
        b = data[pos] if pos < len(data) else 0
        pos += 1
        return b

    code = 0
    for _ in range(4):
        code = (code << 8) | next_byte()
    model = _LaplaceModel(c.m)
    low, rng = 0, MASK
    out = []
    for _ in range(c.declared_length):
        r = rng // model.total
        offset = code - low
        if offset < 0:
            raise MalformedStream("code value below the coding interval")
        s, cum, freq = model.find(offset // r)
        out.append(s)
        low += cum * r
        rng = freq * r
        while True:
            if (low ^ (low + rng)) < TOP:
                pass
            elif rng < BOT:
                rng = -low & (BOT - 1)
            else:
                break
            code = ((code << 8) | next_byte()) & MASK
            low = (low << 8) & MASK
            rng = (rng << 8) & MASK
        model.update(s)
    return tuple(out)


def decode(c: CodedMessage) -> tuple[int, ...]:
    """Inverse of :func:`encode`; raises :class:`MalformedStream` on any non-canonical payload."""
    if not 2 <= c.m <= 255:
        raise MalformedStream(f"invalid alphabet size {c.m}")
    if any(b not in (0, 1) for b in c.bits):
        raise MalformedStream("payload bits must be 0 or 1")
    x = _decode_symbols(c) if c.declared_length else ()
    expected = encode(x, c.m).bits
    tail = c.bits[len(expected):]
    if c.bits[:len(expected)] != expected or len(tail) >= 8 or any(tail):
        raise MalformedStream("payload is not a complete codeword for its declared length")
    return x


@dataclass
class CodeLengthReport:
    m: int
    N: int
    K: int
    samples: int
    mean_bits_x: float
    mean_bits_y: float
    diff: float
    seed: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def compare_code_lengths(cfg: ShapingConfig, samples: int, seed: int = 0) -> CodeLengthReport:
    """Mean payload bits of ``encode(x)`` versus ``encode(shape(x))`` over random source strings."""
    if samples < 1:
        raise ValueError("samples must be at least 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    bits_x, bits_y = [], []
    batch = 10_000
    done = 0
    while done < samples:
        n = min(batch, samples - done)
        for row in sample_strings(rng, n, cfg.N, cfg.m, cfg.ensemble):
            x = tuple(int(s) for s in row)
            bits_x.append(len(encode(x, cfg.m).bits))
            bits_y.append(len(encode(shape(x, cfg), cfg.m).bits))
        done += n
    mx = math.fsum(bits_x) / samples
    my = math.fsum(bits_y) / samples
    return CodeLengthReport(cfg.m, cfg.N, cfg.K, samples, mx, my, mx - my, seed)
