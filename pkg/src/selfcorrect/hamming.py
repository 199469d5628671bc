"""Extended Hamming (SEC-DED) codec over blocks of 2**r bits.

Bit ``j`` of a block is stored MSB-first: byte ``j // 8``, bit ``7 - j % 8``.
Parity lives at position 0 (overall parity) and at every power of two;
data bits fill the remaining positions in ascending order.

The syndrome of a block is the XOR of the indices of all its set bits.
A valid codeword has syndrome 0 and even popcount.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Iterator, Optional

import numpy as np

SUPPORTED_ORDERS = (4, 7, 15, 23)


class CodecError(ValueError):
    pass


class InvalidOrderError(CodecError):
    pass


class SizeMismatchError(CodecError):
    pass


@dataclass(frozen=True)
class BlockOrder:
    """Block geometry: ``r`` index bits, ``2**r`` total bits."""

    r: int

    def __post_init__(self):
        if self.r not in SUPPORTED_ORDERS:
            raise InvalidOrderError(f"unsupported block order r={self.r}; expected one of {SUPPORTED_ORDERS}")

    @property
    def total_bits(self) -> int:
        return 1 << self.r

    @property
    def total_bytes(self) -> int:
        return self.total_bits // 8

    @property
    def redundancy_bits(self) -> int:
        return self.r + 1

    @property
    def data_bits(self) -> int:
        return self.total_bits - self.r - 1

    @property
    def parity_positions(self) -> tuple[int, ...]:
        return (0,) + tuple(1 << i for i in range(self.r))


SMALL = BlockOrder(7)
MEDIUM = BlockOrder(15)
LARGE = BlockOrder(23)


def as_order(order) -> BlockOrder:
    if isinstance(order, BlockOrder):
        return order
    return BlockOrder(int(order))


def data_capacity(order) -> int:
    """Number of data bits an order-r block carries: ``2**r - r - 1``."""
    return as_order(order).data_bits


@lru_cache(maxsize=None)
def _data_positions(r: int) -> np.ndarray:
    n = 1 << r
    mask = np.ones(n, dtype=bool)
    mask[0] = False
    mask[[1 << i for i in range(r)]] = False
    positions = np.flatnonzero(mask)
    positions.setflags(write=False)
    return positions


def data_positions(order) -> np.ndarray:
    """Ascending array of the non-parity bit positions."""
    return _data_positions(as_order(order).r)


# Per-byte lookup tables for the packed syndrome.
_BYTE_PARITY = np.array([bin(v).count("1") & 1 for v in range(256)], dtype=np.uint8)
_BYTE_LOW_XOR = np.array(
    [np.bitwise_xor.reduce([7 - b for b in range(8) if v >> b & 1] or [0]) for v in range(256)],
    dtype=np.uint32,
)


@lru_cache(maxsize=None)
def _byte_index(nbytes: int) -> np.ndarray:
    idx = np.arange(nbytes, dtype=np.uint32)
    idx.setflags(write=False)
    return idx


@dataclass(frozen=True)
class OpCounter:
    """Cost of one naive syndrome scan: one index-XOR per bit per index bit."""

    xor_accumulations: int = 0


def naive_scan_cost(order) -> int:
    order = as_order(order)
    return order.r * order.total_bits


@dataclass(frozen=True)
class CodeBlock:
    """An order-r block held as packed MSB-first bytes."""

    order: BlockOrder
    raw: bytes

    def __post_init__(self):
        if len(self.raw) != self.order.total_bytes:
            raise SizeMismatchError(
                f"order-{self.order.r} block needs {self.order.total_bytes} bytes, got {len(self.raw)}"
            )

    @classmethod
    def from_bytes(cls, raw: bytes, order) -> "CodeBlock":
        return cls(as_order(order), bytes(raw))

    @classmethod
    def from_bits(cls, bits, order) -> "CodeBlock":
        order = as_order(order)
        arr = _as_bit_array(bits, order.total_bits, "block")
        return cls(order, np.packbits(arr).tobytes())

    @property
    def bits(self) -> np.ndarray:
        return np.unpackbits(np.frombuffer(self.raw, dtype=np.uint8))

    def bit(self, j: int) -> int:
        return self.raw[j >> 3] >> (7 - (j & 7)) & 1

    def flip(self, *positions: int) -> "CodeBlock":
        buf = bytearray(self.raw)
        for j in positions:
            if not 0 <= j < self.order.total_bits:
                raise IndexError(f"bit {j} outside order-{self.order.r} block")
            buf[j >> 3] ^= 0x80 >> (j & 7)
        return CodeBlock(self.order, bytes(buf))

    def __len__(self) -> int:
        return self.order.total_bits


def _as_bit_array(bits, n: int, what: str) -> np.ndarray:
    arr = np.asarray(bits, dtype=np.uint8).ravel()
    if arr.size != n:
        raise SizeMismatchError(f"{what} needs {n} bits, got {arr.size}")
    if arr.size and arr.max() > 1:
        raise CodecError(f"{what} bits must be 0 or 1")
    return arr


def _packed_syndrome(raw: bytes) -> tuple[int, int]:
    b = np.frombuffer(raw, dtype=np.uint8)
    odd = _BYTE_PARITY[b]
    # Index of bit j is 8*byte + (7 - bitpos): split into byte part and in-byte part.
    hi = int(np.bitwise_xor.reduce(_byte_index(b.size)[odd.astype(bool)])) if odd.any() else 0
    lo = int(np.bitwise_xor.reduce(_BYTE_LOW_XOR[b]))
    return (hi << 3) ^ lo, int(odd.sum() & 1)


def syndrome(block: CodeBlock) -> tuple[int, int, OpCounter]:
    """Return ``(syndrome, overall_parity, counter)`` for a block.

    The XOR is folded a byte at a time, but the counter reports the cost of
    the bit-by-bit scan (``r * 2**r``), which is the figure used for device
    burden estimates.
    """
    s, parity = _packed_syndrome(block.raw)
    return s, parity, OpCounter(naive_scan_cost(block.order))


def encode(data, order) -> CodeBlock:
    """Encode ``data_capacity(order)`` data bits into a valid codeword."""
    order = as_order(order)
    arr = _as_bit_array(data, order.data_bits, "data")
    bits = np.zeros(order.total_bits, dtype=np.uint8)
    bits[data_positions(order)] = arr
    s = int(np.bitwise_xor.reduce(data_positions(order)[arr.astype(bool)])) if arr.any() else 0
    for i in range(order.r):
        if s >> i & 1:
            bits[1 << i] = 1
    bits[0] = (int(arr.sum()) + bin(s).count("1")) & 1
    return CodeBlock(order, np.packbits(bits).tobytes())


def encode_bytes(data: bytes, order) -> CodeBlock:
    """Encode bytes (MSB-first) into a byte-aligned block (r >= 7)."""
    order = as_order(order)
    if order.data_bits % 8:
        raise InvalidOrderError(f"order-{order.r} blocks do not carry whole bytes")
    if len(data) != order.data_bits // 8:
        raise SizeMismatchError(f"order-{order.r} block carries {order.data_bits // 8} bytes, got {len(data)}")
    return encode(np.unpackbits(np.frombuffer(data, dtype=np.uint8)), order)


def extract_data(block: CodeBlock) -> np.ndarray:
    """Data bits of ``block`` (no correction applied), as a uint8 0/1 array."""
    return block.bits[data_positions(block.order)]


def extract_bytes(block: CodeBlock) -> bytes:
    if block.order.data_bits % 8:
        raise InvalidOrderError(f"order-{block.order.r} blocks do not carry whole bytes")
    return np.packbits(extract_data(block)).tobytes()


class Outcome(enum.Enum):
    CLEAN = "clean"
    CORRECTED = "corrected"
    UNCORRECTABLE = "uncorrectable"


@dataclass(frozen=True)
class DecodeOutcome:
    kind: Outcome
    syndrome: int
    overall_parity: int
    position: Optional[int] = None

    @classmethod
    def classify(cls, s: int, parity: int) -> "DecodeOutcome":
        if parity:
            # Odd parity: single error at s; s == 0 means bit 0 itself flipped.
            return cls(Outcome.CORRECTED, s, parity, position=s)
        if s:
            return cls(Outcome.UNCORRECTABLE, s, parity)
        return cls(Outcome.CLEAN, s, parity)

    @property
    def clean(self) -> bool:
        return self.kind is Outcome.CLEAN

    @property
    def corrected(self) -> bool:
        return self.kind is Outcome.CORRECTED

    @property
    def uncorrectable(self) -> bool:
        return self.kind is Outcome.UNCORRECTABLE


@dataclass(frozen=True)
class DecodeResult:
    """Decoded block. Unpacks as ``outcome, repaired, data``.

    ``data`` is extracted on first access; for uncorrectable blocks it is
    the unrepaired data and must not be trusted.
    """

    outcome: DecodeOutcome
    repaired: CodeBlock

    @cached_property
    def data(self) -> np.ndarray:
        return extract_data(self.repaired)

    @property
    def data_bytes(self) -> bytes:
        return np.packbits(self.data).tobytes()

    def __iter__(self) -> Iterator:
        return iter((self.outcome, self.repaired, self.data))


def decode(block: CodeBlock) -> DecodeResult:
    """Classify a block and repair it if a single error is present.

    Three or more errors may be misread as a single correctable error at
    the wrong position; callers needing certainty must verify the content
    by other means.
    """
    s, parity = _packed_syndrome(block.raw)
    outcome = DecodeOutcome.classify(s, parity)
    repaired = block.flip(outcome.position) if outcome.corrected else block
    return DecodeResult(outcome, repaired)
