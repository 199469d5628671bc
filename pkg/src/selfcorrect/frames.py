"""Wire frames built from SEC-DED protected components.

Layout of a DATA frame (4136 bytes)::

    +----------+-----+-----------+-----------+---------------+
    | PREAMBLE | SFD | L2 header | L3 header | payload block |
    | 7 x 0x55 | D5  | 16 B (r7) | 16 B (r7) | 4096 B (r15)  |
    +----------+-----+-----------+-----------+---------------+

Each header's 15 logical bytes are the data bits of one order-7 block; the
payload's 4094 content bytes are the data bits of one order-15 block. The
parity bits are interleaved at power-of-two bit positions, so no field sits
at a fixed byte offset on the wire.

L2 logical bytes: dst MAC (6), src MAC (6), ether type (1), preserved (2).
L3 logical bytes: src IP (4), dst IP (4), id (2), flag:3|offset:13 (2),
ttl (1), err_pos (2). All integers are big-endian.

Control frames carry only the L2 block, except HASH_CHECK which adds one
order-7 block holding ``id (2) + digest (8)`` and five zero bytes.
"""
from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field
from typing import Optional

from .hamming import MEDIUM, SMALL, CodeBlock, DecodeOutcome, decode, encode_bytes, extract_bytes

PREAMBLE = b"\x55" * 7
SFD = b"\xd5"
SYNC = PREAMBLE + SFD

HEADER_BYTES = SMALL.total_bytes  # 16
HEADER_DATA_BYTES = SMALL.data_bits // 8  # 15
PAYLOAD_BYTES = MEDIUM.total_bytes  # 4096
CONTENT_BYTES = MEDIUM.data_bits // 8  # 4094

FLAG_MORE_FRAGMENTS = 0b001
FLAG_HEADER_CORRECTED = 0b010


class FrameError(ValueError):
    pass


class MalformedFrameError(FrameError):
    pass


class UnknownProtocolError(FrameError):
    pass


class TruncatedFrameError(FrameError):
    pass


class FrameKind(enum.IntEnum):
    """Protocol numbers carried in the one-byte ether type field."""

    DATA = 0x01
    ACK = 0x02
    NAK = 0x03
    HASH_CHECK = 0x04
    HASH_OK = 0x05
    HASH_FAIL = 0x06
    EOF = 0x07


# Number of coded blocks following L2, per kind.
_BODY_BLOCKS = {
    FrameKind.DATA: (SMALL, MEDIUM),
    FrameKind.HASH_CHECK: (SMALL,),
}


def wire_length(kind: FrameKind) -> int:
    return len(SYNC) + HEADER_BYTES + sum(o.total_bytes for o in _BODY_BLOCKS.get(FrameKind(kind), ()))


@dataclass(frozen=True)
class L2Header:
    dst_mac: bytes = bytes(6)
    src_mac: bytes = bytes(6)
    ether_type: int = FrameKind.DATA
    preserved: int = 0

    def __post_init__(self):
        if len(self.dst_mac) != 6 or len(self.src_mac) != 6:
            raise ValueError("MAC addresses are 6 bytes")
        if not 0 <= self.ether_type <= 0xFF:
            raise ValueError(f"ether_type {self.ether_type} does not fit one byte")
        if not 0 <= self.preserved <= 0xFFFF:
            raise ValueError(f"preserved {self.preserved} does not fit two bytes")

    def pack(self) -> bytes:
        return self.dst_mac + self.src_mac + struct.pack(">BH", self.ether_type, self.preserved)

    @classmethod
    def unpack(cls, data: bytes) -> "L2Header":
        ether_type, preserved = struct.unpack(">BH", data[12:15])
        return cls(bytes(data[0:6]), bytes(data[6:12]), ether_type, preserved)


@dataclass(frozen=True)
class L3Header:
    src_ip: bytes = bytes(4)
    dst_ip: bytes = bytes(4)
    id: int = 0
    flag: int = 0
    offset: int = 0
    ttl: int = 64
    err_pos: int = 0

    def __post_init__(self):
        if len(self.src_ip) != 4 or len(self.dst_ip) != 4:
            raise ValueError("IPv4 addresses are 4 bytes")
        for name, value, bits in (
            ("id", self.id, 16),
            ("flag", self.flag, 3),
            ("offset", self.offset, 13),
            ("ttl", self.ttl, 8),
            ("err_pos", self.err_pos, 16),
        ):
            if not 0 <= value < 1 << bits:
                raise ValueError(f"{name}={value} does not fit {bits} bits")

    @property
    def more_fragments(self) -> bool:
        return bool(self.flag & FLAG_MORE_FRAGMENTS)

    def pack(self) -> bytes:
        return (
            self.src_ip
            + self.dst_ip
            + struct.pack(">HHBH", self.id, self.flag << 13 | self.offset, self.ttl, self.err_pos)
        )

    @classmethod
    def unpack(cls, data: bytes) -> "L3Header":
        id_, fo, ttl, err_pos = struct.unpack(">HHBH", data[8:15])
        return cls(bytes(data[0:4]), bytes(data[4:8]), id_, fo >> 13, fo & 0x1FFF, ttl, err_pos)


def pack_hash_check(packet_id: int, digest: int) -> bytes:
    return struct.pack(">HQ", packet_id, digest)


@dataclass(frozen=True)
class Frame:
    """Logical content of a frame; ``content`` is the body for DATA/HASH_CHECK."""

    kind: FrameKind
    l2: L2Header
    l3: Optional[L3Header] = None
    content: Optional[bytes] = None

    @property
    def check_id(self) -> int:
        return struct.unpack(">H", self.content[0:2])[0]

    @property
    def digest(self) -> int:
        return struct.unpack(">Q", self.content[2:10])[0]


@dataclass(frozen=True)
class ParsedFrame:
    frame: Frame
    outcomes: tuple[DecodeOutcome, ...]
    blocks: tuple[CodeBlock, ...] = field(repr=False, default=())

    @property
    def uncorrectable(self) -> bool:
        return any(o.uncorrectable for o in self.outcomes)

    @property
    def corrections(self) -> int:
        return sum(o.corrected for o in self.outcomes)

    @property
    def payload_outcome(self) -> Optional[DecodeOutcome]:
        return self.outcomes[2] if self.frame.kind is FrameKind.DATA else None


def build_frame(kind, l2: L2Header, l3: Optional[L3Header] = None, content: Optional[bytes] = None) -> bytes:
    """Serialize a frame to wire bytes.

    ``l2.ether_type`` is overwritten with ``kind``. DATA needs ``l3`` and a
    4094-byte ``content``; HASH_CHECK needs ``content`` of at most 15 bytes
    (see :func:`pack_hash_check`); other kinds take neither.
    """
    try:
        kind = FrameKind(kind)
    except ValueError:
        raise UnknownProtocolError(f"unknown frame kind {kind!r}") from None
    if l2.ether_type != kind:
        l2 = L2Header(l2.dst_mac, l2.src_mac, kind, l2.preserved)
    parts = [SYNC, encode_bytes(l2.pack(), SMALL).raw]
    if kind is FrameKind.DATA:
        if l3 is None or content is None:
            raise ValueError("DATA frames need an L3 header and content")
        if len(content) != CONTENT_BYTES:
            raise ValueError(f"DATA content must be {CONTENT_BYTES} bytes, got {len(content)}")
        parts.append(encode_bytes(l3.pack(), SMALL).raw)
        parts.append(encode_bytes(bytes(content), MEDIUM).raw)
    elif kind is FrameKind.HASH_CHECK:
        if l3 is not None or content is None:
            raise ValueError("HASH_CHECK frames need content and no L3 header")
        if len(content) > HEADER_DATA_BYTES:
            raise ValueError(f"HASH_CHECK body holds at most {HEADER_DATA_BYTES} bytes, got {len(content)}")
        parts.append(encode_bytes(bytes(content).ljust(HEADER_DATA_BYTES, b"\0"), SMALL).raw)
    elif l3 is not None or content is not None:
        raise ValueError(f"{kind.name} frames carry no L3 header or content")
    wire = b"".join(parts)
    assert len(wire) == wire_length(kind)
    return wire


def parse_frame(wire: bytes) -> ParsedFrame:
    """Decode every block of a frame, repairing single-bit errors.

    Uncorrectable blocks are reported in ``outcomes`` rather than raised;
    their logical fields are read as-is and must not be trusted.
    """
    if len(wire) < len(SYNC) + HEADER_BYTES:
        raise TruncatedFrameError(f"{len(wire)} bytes is shorter than any frame")
    if wire[: len(SYNC)] != SYNC:
        raise MalformedFrameError("bad preamble/SFD")
    pos = len(SYNC)
    l2_res = decode(CodeBlock(SMALL, bytes(wire[pos : pos + HEADER_BYTES])))
    pos += HEADER_BYTES
    l2 = L2Header.unpack(extract_bytes(l2_res.repaired))
    try:
        kind = FrameKind(l2.ether_type)
    except ValueError:
        raise UnknownProtocolError(f"unknown ether type 0x{l2.ether_type:02x}") from None
    if len(wire) != wire_length(kind):
        raise TruncatedFrameError(f"{kind.name} frame needs {wire_length(kind)} bytes, got {len(wire)}")

    outcomes = [l2_res.outcome]
    blocks = [l2_res.repaired]
    payloads = []
    for order in _BODY_BLOCKS.get(kind, ()):
        res = decode(CodeBlock(order, bytes(wire[pos : pos + order.total_bytes])))
        pos += order.total_bytes
        outcomes.append(res.outcome)
        blocks.append(res.repaired)
        payloads.append(extract_bytes(res.repaired))

    if kind is FrameKind.DATA:
        frame = Frame(kind, l2, L3Header.unpack(payloads[0]), payloads[1])
    elif kind is FrameKind.HASH_CHECK:
        frame = Frame(kind, l2, None, payloads[0])
    else:
        frame = Frame(kind, l2)
    return ParsedFrame(frame, tuple(outcomes), tuple(blocks))


# name -> (content bytes, wire bytes)
FRAME_PROFILES = {
    "protocol": (CONTENT_BYTES, wire_length(FrameKind.DATA)),
    # 8 B preamble/SFD + 14 B Ethernet header + 20 B IP header + 1480 B + 4 B FCS
    "baseline": (1480, 1526),
}


def payload_proportion(kind="protocol") -> float:
    """Content bytes over wire bytes for a frame profile or frame kind."""
    if isinstance(kind, str):
        content, wire = FRAME_PROFILES[kind]
    else:
        kind = FrameKind(kind)
        content = CONTENT_BYTES if kind is FrameKind.DATA else 0
        wire = wire_length(kind)
    return content / wire


def peek_kind(wire: bytes) -> str:
    """Frame kind name read from the (repaired) L2 block, or "UNKNOWN"."""
    if len(wire) < len(SYNC) + HEADER_BYTES:
        return "UNKNOWN"
    res = decode(CodeBlock(SMALL, bytes(wire[len(SYNC) : len(SYNC) + HEADER_BYTES])))
    ether_type = extract_bytes(res.repaired)[12]
    try:
        return FrameKind(ether_type).name
    except ValueError:
        return "UNKNOWN"
