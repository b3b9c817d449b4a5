"""Packed binary codes, Hamming distance, and storage accounting."""

from __future__ import annotations

import math
import struct

import numpy as np

from .errors import DomainError, FormatError, ShapeError

_WORD_BITS = 64


class PackedCode:
    """An m-bit code stored LSB-first in little-endian uint64 words.

    Bit j of the code lives in word j // 64 at position j % 64.  Unused
    tail bits of the last word are kept at zero so equality is plain
    word-wise comparison.
    """

    __slots__ = ("words", "m")

    def __init__(self, words: np.ndarray, m: int):
        words = np.asarray(words, dtype=np.uint64)
        if m < 1:
            raise ShapeError("code length must be >= 1")
        if words.shape != (_n_words(m),):
            raise ShapeError(
                f"expected {_n_words(m)} words for {m} bits, got {words.shape}"
            )
        tail = m % _WORD_BITS
        if tail and (words[-1] >> np.uint64(tail)) != 0:
            raise ShapeError("non-zero bits beyond code length")
        self.words = words
        self.m = m

    @classmethod
    def from_bits(cls, bits) -> "PackedCode":
        bits = np.asarray(bits)
        if bits.ndim != 1 or bits.size == 0:
            raise ShapeError("bits must be a non-empty 1-d sequence")
        packed = np.packbits(bits.astype(np.uint8), bitorder="little")
        packed = np.pad(packed, (0, -packed.size % 8))
        return cls(packed.view("<u8"), bits.size)

    def to_bits(self) -> np.ndarray:
        raw = np.unpackbits(self.words.view(np.uint8), bitorder="little")
        return raw[: self.m].astype(bool)

    def complement(self) -> "PackedCode":
        words = ~self.words
        tail = self.m % _WORD_BITS
        if tail:
            words[-1] &= (np.uint64(1) << np.uint64(tail)) - np.uint64(1)
        return PackedCode(words, self.m)

    def to_bytes(self) -> bytes:
        return struct.pack("<I", self.m) + self.words.astype("<u8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "PackedCode":
        if len(data) < 4:
            raise FormatError("truncated code: missing length prefix", offset=0)
        (m,) = struct.unpack_from("<I", data)
        if m < 1:
            raise FormatError("code length must be >= 1", offset=0)
        need = 4 + 8 * _n_words(m)
        if len(data) != need:
            raise FormatError(
                f"expected {need} bytes for a {m}-bit code, got {len(data)}",
                offset=min(len(data), need),
            )
        words = np.frombuffer(data, dtype="<u8", offset=4).astype(np.uint64)
        tail = m % _WORD_BITS
        if tail and (words[-1] >> np.uint64(tail)) != 0:
            raise FormatError("non-zero padding bits", offset=need - 8)
        return cls(words, m)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PackedCode):
            return NotImplemented
        return self.m == other.m and bool(np.array_equal(self.words, other.words))

    def __hash__(self):
        return hash((self.m, self.words.tobytes()))

    def __repr__(self):
        return f"PackedCode(m={self.m})"


def _n_words(m: int) -> int:
    return (m + _WORD_BITS - 1) // _WORD_BITS


def from_signs(values) -> PackedCode:
    """Sign-quantize: bit j = 1 iff values[j] > 0 (zero maps to 0)."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or values.size == 0:
        raise ShapeError("values must be a non-empty 1-d vector")
    return PackedCode.from_bits(values > 0.0)


def hamming(a: PackedCode, b: PackedCode) -> tuple[int, float]:
    """(raw, normalized) Hamming distance between two equal-length codes."""
    if a.m != b.m:
        raise ShapeError(f"code length mismatch: {a.m} vs {b.m}")
    raw = int(np.bitwise_count(a.words ^ b.words).sum())
    return raw, raw / a.m


def storage_bits(m: int, m_pool: int) -> float:
    """Total bits for an m-bit adaptive code: m plus log2 C(m_pool, m).

    The second term is the cost of identifying which m of the m_pool rows
    were retained.  Computed with log-gamma, accurate to >= 10 significant
    digits.
    """
    if m < 0 or m > m_pool:
        raise DomainError(f"need 0 <= m <= m_pool, got m={m}, m_pool={m_pool}")
    log2_binom = (
        math.lgamma(m_pool + 1) - math.lgamma(m + 1) - math.lgamma(m_pool - m + 1)
    ) / math.log(2.0)
    return m + log2_binom
