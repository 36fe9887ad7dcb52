"""Bloom filter with a fixed, seedless hash so table files are bit-exact.

Double hashing over the two 64-bit halves of blake2b-128: position_i =
(h1 + i*h2) mod m. No false negatives by construction; the expected false
positive rate is (1 - e^(-kn/m))^k.
"""

import hashlib
import math
import struct
from typing import Iterable

from .errors import FormatError

_HEADER = struct.Struct("<QIQ")  # m_bits, k, n_keys


class BloomFilter:
    __slots__ = ("m_bits", "k", "n_keys", "_bits")

    def __init__(self, m_bits: int, k: int, n_keys: int = 0, bits: bytearray | None = None):
        self.m_bits = m_bits
        self.k = k
        self.n_keys = n_keys
        self._bits = bits if bits is not None else bytearray((m_bits + 7) // 8)

    @classmethod
    def build(cls, keys: Iterable[bytes], bits_per_key: float) -> "BloomFilter":
        keys = list(keys)
        n = len(keys)
        if n == 0:
            return cls(0, 0, 0)
        m = max(64, math.ceil(n * bits_per_key))
        k = max(1, min(30, round(bits_per_key * math.log(2))))
        filt = cls(m, k, n)
        for key in keys:
            filt._add(key)
        return filt

    def _positions(self, key: bytes):
        digest = hashlib.blake2b(key, digest_size=16).digest()
        h1 = int.from_bytes(digest[:8], "little")
        h2 = int.from_bytes(digest[8:], "little") | 1
        m = self.m_bits
        for i in range(self.k):
            yield (h1 + i * h2) % m

    def _add(self, key: bytes) -> None:
        bits = self._bits
        for pos in self._positions(key):
            bits[pos >> 3] |= 1 << (pos & 7)

    def might_contain(self, key: bytes) -> bool:
        if self.m_bits == 0:
            return False
        bits = self._bits
        for pos in self._positions(key):
            if not bits[pos >> 3] & (1 << (pos & 7)):
                return False
        return True

    def expected_fp_rate(self) -> float:
        if self.m_bits == 0 or self.n_keys == 0:
            return 0.0
        return (1.0 - math.exp(-self.k * self.n_keys / self.m_bits)) ** self.k

    def to_bytes(self) -> bytes:
        return _HEADER.pack(self.m_bits, self.k, self.n_keys) + bytes(self._bits)

    @classmethod
    def from_bytes(cls, data: bytes) -> "BloomFilter":
        if len(data) < _HEADER.size:
            raise FormatError("bloom section truncated")
        m_bits, k, n_keys = _HEADER.unpack_from(data)
        body = bytearray(data[_HEADER.size :])
        if len(body) != (m_bits + 7) // 8:
            raise FormatError("bloom bit array length mismatch")
        return cls(m_bits, k, n_keys, body)
