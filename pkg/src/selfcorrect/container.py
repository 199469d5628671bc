"""Framed-file container: ``b"SCF1"``, a big-endian uint32 frame count, then
that many 4136-byte DATA frames back to back."""
from __future__ import annotations

import struct
from dataclasses import dataclass

from .engine import DATA_WIRE, chunk_payload, ip_of, mac_of, reassemble
from .frames import FLAG_MORE_FRAGMENTS, FrameError, FrameKind, L2Header, L3Header, build_frame, parse_frame

MAGIC = b"SCF1"
HEADER = struct.Struct(">4sI")


class ContainerError(ValueError):
    pass


def encode_file(data: bytes) -> bytes:
    chunks = chunk_payload(data)
    frames = []
    for i, content in enumerate(chunks):
        flag = FLAG_MORE_FRAGMENTS if i < len(chunks) - 1 else 0
        l3 = L3Header(ip_of(0), ip_of(1), (i % 0xFFFF) + 1, flag, i, 64, 0)
        frames.append(build_frame(FrameKind.DATA, L2Header(mac_of(1), mac_of(0)), l3, content))
    return HEADER.pack(MAGIC, len(frames)) + b"".join(frames)


def split_frames(blob: bytes) -> list[bytes]:
    if len(blob) < HEADER.size:
        raise ContainerError("truncated container header")
    magic, count = HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise ContainerError(f"bad magic {magic!r}")
    if len(blob) != HEADER.size + count * DATA_WIRE:
        raise ContainerError(f"container declares {count} frames but holds {len(blob) - HEADER.size} bytes")
    return [blob[HEADER.size + i * DATA_WIRE : HEADER.size + (i + 1) * DATA_WIRE] for i in range(count)]


def apply_flips(frame: bytes, bits) -> bytes:
    buf = bytearray(frame)
    for b in bits:
        if not 0 <= b < len(buf) * 8:
            raise ContainerError(f"flip bit {b} outside {len(buf)}-byte frame")
        buf[b >> 3] ^= 0x80 >> (b & 7)
    return bytes(buf)


@dataclass
class FrameReport:
    index: int
    outcomes: list  # per block: "clean" | "corrected@pos" | "uncorrectable"
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error and not any(o == "uncorrectable" for o in self.outcomes)


def _describe(outcome) -> str:
    if outcome.corrected:
        return f"corrected@{outcome.position}"
    return outcome.kind.value


def decode_file(blob: bytes, flips: dict | None = None) -> tuple[bytes, list[FrameReport]]:
    """Parse a container, optionally flipping wire bits first.

    ``flips`` maps frame index to a list of wire bit offsets. Returns the
    reassembled data (empty if any frame failed) and per-frame reports.
    """
    flips = flips or {}
    frames = split_frames(blob)
    for idx in flips:
        if not 0 <= idx < len(frames):
            raise ContainerError(f"flip targets frame {idx}, container has {len(frames)}")
    chunks: dict[int, bytes] = {}
    reports = []
    for i, wire in enumerate(frames):
        wire = apply_flips(wire, flips.get(i, ()))
        try:
            parsed = parse_frame(wire)
        except FrameError as exc:
            reports.append(FrameReport(i, [], str(exc)))
            continue
        report = FrameReport(i, [_describe(o) for o in parsed.outcomes])
        if parsed.frame.kind is not FrameKind.DATA:
            report.error = f"unexpected {parsed.frame.kind.name} frame"
        elif report.ok:
            chunks[parsed.frame.l3.offset] = parsed.frame.content
        reports.append(report)
    if any(not r.ok for r in reports) or sorted(chunks) != list(range(len(frames))):
        return b"", reports
    return reassemble([chunks[i] for i in range(len(frames))]), reports
