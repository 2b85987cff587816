"""Bit-exact wire format for quantized gradient messages.

Each block is serialized as

    31-bit magnitude (float32 pattern without the sign bit, norms are
        nonnegative)
  + ceil(log2(d_b + 1))-bit count n0 of zero levels
  + ceil(log2 C(d_b, n0)) bits ranking the zero positions
        (combinatorial number system)
  + one sign bit per nonzero level
  + the levels themselves, either unary (k is sent as k-1 ones and a
        terminating zero) or as Elias omega codes.

The expected unary payload for a unit-norm input is at most the budget
proxy ||h^-1||_2, which is what the step solvers control.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from math import comb
from typing import Sequence

import numpy as np

from .errors import (
    LevelOverflow,
    MalformedPayload,
    OutOfRange,
    TruncatedPayload,
    UnknownKind,
)

MAGNITUDE_BITS = 31
LEVEL_CAP = 1 << 63

_LEVEL_CODINGS = ("unary", "elias")


@dataclass(frozen=True)
class EncodedMessage:
    """Serialized quantized vector: payload bytes plus exact bit length."""

    payload: bytes
    bit_count: int
    breakdown: dict


class _BitWriter:
    """Append-only MSB-first bit buffer."""

    def __init__(self):
        self._bytes = bytearray()
        self._acc = 0
        self._nacc = 0
        self.bit_count = 0

    def write(self, value: int, width: int) -> None:
        self.bit_count += width
        acc, nacc = self._acc, self._nacc
        while width > 0:
            take = min(8 - nacc, width)
            width -= take
            acc = (acc << take) | ((value >> width) & ((1 << take) - 1))
            nacc += take
            if nacc == 8:
                self._bytes.append(acc)
                acc, nacc = 0, 0
        self._acc, self._nacc = acc, nacc

    def write_bitstring(self, bits: str) -> None:
        for ch in bits:
            self.write(ch == "1", 1)

    def payload(self) -> bytes:
        out = bytearray(self._bytes)
        if self._nacc:
            out.append(self._acc << (8 - self._nacc))
        return bytes(out)


class _BitReader:
    """MSB-first reader that enforces the exact declared bit length."""

    def __init__(self, payload: bytes, bit_count: int):
        if len(payload) * 8 < bit_count:
            raise TruncatedPayload("payload holds fewer bits than declared")
        self._payload = payload
        self._limit = bit_count
        self.pos = 0

    def read(self, width: int) -> int:
        if self.pos + width > self._limit:
            raise TruncatedPayload("read past end of message")
        value = 0
        pos = self.pos
        for _ in range(width):
            byte = self._payload[pos >> 3]
            value = (value << 1) | ((byte >> (7 - (pos & 7))) & 1)
            pos += 1
        self.pos = pos
        return value

    def read_unary(self) -> int:
        ones = 0
        while self.read(1):
            ones += 1
        return ones + 1


def elias_omega_encode(value: int) -> str:
    """Elias omega code of a positive integer as a '0'/'1' string."""
    if value < 1:
        raise OutOfRange(f"Elias omega is defined for positive integers, got {value}")
    code = "0"
    k = value
    while k > 1:
        group = bin(k)[2:]
        code = group + code
        k = len(group) - 1
    return code


def elias_omega_decode(bits: str, start: int = 0) -> tuple[int, int]:
    """Decode one Elias omega code; returns (value, next position)."""
    pos = start
    value = 1
    while True:
        if pos >= len(bits):
            raise TruncatedPayload("Elias omega code ran past end of input")
        if bits[pos] == "0":
            return value, pos + 1
        if pos + value + 1 > len(bits):
            raise TruncatedPayload("Elias omega group ran past end of input")
        value = int(bits[pos : pos + value + 1], 2)
        pos += value.bit_length()


def _subset_rank(positions: np.ndarray) -> int:
    """Combinatorial-number-system rank of an ascending index subset."""
    rank = 0
    for i, c in enumerate(positions):
        rank += comb(int(c), i + 1)
    return rank


def _subset_unrank(rank: int, size: int) -> list[int]:
    """Inverse of _subset_rank for a subset of the given size."""
    positions = []
    for i in range(size, 0, -1):
        c = i - 1
        while comb(c + 1, i) <= rank:
            c += 1
        positions.append(c)
        rank -= comb(c, i)
    positions.reverse()
    return positions


def _count_width(block_size: int) -> int:
    # n0 takes block_size + 1 distinct values, 0 through block_size.
    return int(block_size).bit_length()


def _rank_width(block_size: int, n_zero: int) -> int:
    return (comb(block_size, n_zero) - 1).bit_length()


def _block_slices(dim: int, block_starts: Sequence[int]):
    starts = [int(s) for s in block_starts]
    return list(zip(starts, starts[1:] + [dim]))


def _check_coding(level_coding: str) -> None:
    if level_coding not in _LEVEL_CODINGS:
        raise UnknownKind(f"level coding must be one of {_LEVEL_CODINGS}")


def _magnitude_pattern(value: float) -> int:
    if not value >= 0:
        raise OutOfRange(f"magnitude {value!r} does not fit the 31-bit field")
    try:
        packed = struct.pack(">f", value)
    except OverflowError as exc:
        raise OutOfRange(f"magnitude {value!r} overflows float32") from exc
    return int.from_bytes(packed, "big") & 0x7FFFFFFF


def _magnitude_value(pattern: int) -> float:
    return struct.unpack(">f", pattern.to_bytes(4, "big"))[0]


def encode_quantized(q, level_coding: str = "unary") -> EncodedMessage:
    """Serialize a QuantizedVector; bit_count is the exact payload length."""
    _check_coding(level_coding)
    writer = _BitWriter()
    magnitude_bits = position_bits = sign_bits = level_bits = 0

    for which, (a, b) in enumerate(_block_slices(q.dim, q.block_starts)):
        size = b - a
        levels = q.levels[a:b]
        signs = q.signs[a:b]

        writer.write(_magnitude_pattern(q.magnitudes[which]), MAGNITUDE_BITS)
        magnitude_bits += MAGNITUDE_BITS

        zero_mask = levels == 0
        n_zero = int(zero_mask.sum())
        count_w = _count_width(size)
        writer.write(n_zero, count_w)
        rank_w = _rank_width(size, n_zero)
        writer.write(_subset_rank(np.nonzero(zero_mask)[0]), rank_w)
        position_bits += count_w + rank_w

        for j in np.nonzero(~zero_mask)[0]:
            writer.write(1 if signs[j] > 0 else 0, 1)
        sign_bits += size - n_zero

        before = writer.bit_count
        for j in np.nonzero(~zero_mask)[0]:
            k = int(levels[j])
            if k >= LEVEL_CAP:
                raise LevelOverflow(f"level {k} exceeds the 63-bit cap")
            if level_coding == "unary":
                writer.write(((1 << (k - 1)) - 1) << 1, k)
            else:
                writer.write_bitstring(elias_omega_encode(k))
        level_bits += writer.bit_count - before

    return EncodedMessage(
        payload=writer.payload(),
        bit_count=writer.bit_count,
        breakdown={
            "magnitude_bits": magnitude_bits,
            "position_bits": position_bits,
            "sign_bits": sign_bits,
            "level_bits": level_bits,
        },
    )


def decode_quantized(
    message: EncodedMessage,
    dim: int,
    block_starts: Sequence[int],
    steps: np.ndarray,
    level_coding: str = "unary",
):
    """Rebuild a QuantizedVector from its serialized form.

    The receiver knows dim, the block layout and the step vector (they
    are negotiated once, outside the per-iteration stream).
    """
    from .compressors import QuantizedVector

    _check_coding(level_coding)
    reader = _BitReader(message.payload, message.bit_count)
    slices = _block_slices(dim, block_starts)
    magnitudes = np.zeros(len(slices))
    signs = np.zeros(dim, dtype=np.int8)
    levels = np.zeros(dim, dtype=np.uint64)

    for which, (a, b) in enumerate(slices):
        size = b - a
        magnitudes[which] = _magnitude_value(reader.read(MAGNITUDE_BITS))

        n_zero = reader.read(_count_width(size))
        if n_zero > size:
            raise MalformedPayload(f"zero count {n_zero} exceeds block size {size}")
        rank = reader.read(_rank_width(size, n_zero))
        if rank >= comb(size, n_zero):
            raise MalformedPayload("zero-position rank out of range")
        zero_positions = set(_subset_unrank(rank, n_zero))
        nonzero = [j for j in range(size) if j not in zero_positions]

        block_signs = [1 if reader.read(1) else -1 for _ in nonzero]
        for j, sgn in zip(nonzero, block_signs):
            if level_coding == "unary":
                k = reader.read_unary()
            else:
                k = _read_elias(reader)
            levels[a + j] = k
            signs[a + j] = sgn

    if reader.pos != message.bit_count:
        raise MalformedPayload("message has trailing bits")
    return QuantizedVector(
        dim=dim,
        block_starts=np.asarray(block_starts, dtype=int),
        magnitudes=magnitudes,
        signs=signs,
        levels=levels,
        steps=np.asarray(steps, dtype=float),
    )


def _read_elias(reader: _BitReader) -> int:
    value = 1
    while reader.read(1):
        group = 1
        for _ in range(value):
            group = (group << 1) | reader.read(1)
        value = group
    return value


def encoded_bit_count(
    levels: np.ndarray,
    dim: int,
    block_starts: Sequence[int],
    level_coding: str = "unary",
) -> tuple[int, dict]:
    """Exact serialized size of a level vector, without building bytes.

    Matches encode_quantized bit for bit; the hot paths use this to
    account transmission cost cheaply.
    """
    _check_coding(level_coding)
    magnitude_bits = position_bits = sign_bits = level_bits = 0
    for a, b in _block_slices(dim, block_starts):
        size = b - a
        block = levels[a:b]
        nonzero = block[block > 0]
        n_zero = size - nonzero.size
        if nonzero.size and int(nonzero.max()) >= LEVEL_CAP:
            raise LevelOverflow("level exceeds the 63-bit cap")
        magnitude_bits += MAGNITUDE_BITS
        position_bits += _count_width(size) + _rank_width(size, n_zero)
        sign_bits += size - n_zero
        if level_coding == "unary":
            level_bits += int(nonzero.sum())
        else:
            level_bits += sum(len(elias_omega_encode(int(k))) for k in nonzero)
    total = magnitude_bits + position_bits + sign_bits + level_bits
    return total, {
        "magnitude_bits": magnitude_bits,
        "position_bits": position_bits,
        "sign_bits": sign_bits,
        "level_bits": level_bits,
    }


def entropy_bound(tau: float, dim: int) -> float:
    """Position-coding budget psi(tau) = d * H2(tau / d) + tau in bits.

    Concave in tau and never larger than d * log2(3).
    """
    if not 0 <= tau <= dim:
        raise OutOfRange(f"tau must lie in [0, {dim}], got {tau}")
    ratio = tau / dim
    h2 = 0.0
    if 0 < ratio < 1:
        h2 = -ratio * np.log2(ratio) - (1 - ratio) * np.log2(1 - ratio)
    return dim * h2 + tau


def bits_proxy(steps: np.ndarray) -> float:
    """Budget proxy ||h^-1||_2: expected unary level cost on unit input."""
    steps = np.asarray(steps, dtype=float)
    if np.any(steps <= 0):
        raise OutOfRange("steps must be positive")
    return float(np.sqrt(np.sum(steps**-2.0)))
