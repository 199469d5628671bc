"""Conventional FCS-discard stop-and-wait, for comparison.

Frames are Ethernet II + IPv4 shaped, 1526 bytes on the wire for 1480
content bytes, closed by a CRC-32 FCS. Any FCS failure discards the frame
silently; the sender recovers by timeout.
"""
from __future__ import annotations

import struct
import zlib
from collections import Counter
from typing import Optional, Sequence, Union

from .channel import ChannelConfig
from .engine import (
    DOWN,
    LENGTH_PREFIX,
    UP,
    EngineParams,
    Network,
    Tick,
    Trace,
    TransferReport,
    _as_configs,
    chunk_payload,
    ip_of,
    mac_of,
    make_links,
    reassemble,
)
from .frames import SYNC

CONTENT = 1480
ETHERTYPE_IPV4 = 0x0800
ETHERTYPE_CONTROL = 0x88B5  # IEEE local experimental
DATA_WIRE = len(SYNC) + 14 + 20 + CONTENT + 4  # 1526
CONTROL_BODY = 46
CONTROL_WIRE = len(SYNC) + 14 + CONTROL_BODY + 4
ACK, NAK = 1, 2


def ipv4_checksum(header: bytes) -> int:
    total = sum(struct.unpack(f">{len(header) // 2}H", header))
    while total > 0xFFFF:
        total = (total & 0xFFFF) + (total >> 16)
    return ~total & 0xFFFF


def _frame(dst: int, src: int, ether_type: int, body: bytes) -> bytes:
    mac = mac_of(dst) + mac_of(src) + struct.pack(">H", ether_type) + body
    return SYNC + mac + struct.pack("<I", zlib.crc32(mac))


def build_data(src: int, dst: int, to: int, pid: int, offset: int, more: bool, ttl: int, content: bytes) -> bytes:
    flags_frag = (0x2000 if more else 0) | (offset & 0x1FFF)
    hdr = struct.pack(">BBHHHBBH4s4s", 0x45, 0, 20 + CONTENT, pid, flags_frag, ttl, 253, 0, ip_of(src), ip_of(dst))
    hdr = hdr[:10] + struct.pack(">H", ipv4_checksum(hdr)) + hdr[12:]
    return _frame(to, src, ETHERTYPE_IPV4, hdr + content)


def build_control(kind: int, to: int, src: int, pid: int) -> bytes:
    return _frame(to, src, ETHERTYPE_CONTROL, struct.pack(">BH", kind, pid).ljust(CONTROL_BODY, b"\0"))


def check(wire: bytes) -> Optional[bytes]:
    """Frame bytes between SFD and FCS, or None if the FCS fails."""
    if len(wire) < len(SYNC) + 18 or wire[: len(SYNC)] != SYNC:
        return None
    body, fcs = wire[len(SYNC) : -4], wire[-4:]
    if struct.pack("<I", zlib.crc32(body)) != fcs:
        return None
    return body


def kind_of(wire: bytes) -> str:
    if len(wire) == DATA_WIRE:
        return "DATA"
    return "CONTROL"


class BaselineSender:
    def __init__(self, payload: bytes, dst: int, params: EngineParams, timeout: int):
        self.chunks = chunk_payload(payload, CONTENT)
        if len(self.chunks) > 1 << 13:
            raise ValueError("payload too large for 13-bit offsets")
        self.dst = dst
        self.params = params
        self.timeout = timeout
        self.index = 0
        self.inflight: Optional[tuple[int, bytes]] = None
        self.retries = 0
        self.sent_at = 0
        self.now = 0
        self.done = False
        self.aborted = False
        self.stats = Counter()

    @property
    def finished(self) -> bool:
        return self.done or self.aborted

    def _load(self):
        pid = self.index % 0xFFFF + 1
        more = self.index < len(self.chunks) - 1
        wire = build_data(0, self.dst, 1, pid, self.index, more, self.params.ttl, self.chunks[self.index])
        self.inflight = (pid, wire)

    def _send(self, retransmit: bool) -> list:
        self.sent_at = self.now
        self.stats["data_sent"] += 1
        if retransmit:
            self.stats["retransmissions"] += 1
        return [(DOWN, self.inflight[1])]

    def start(self, now: int = 0) -> list:
        self.now = now
        self._load()
        return self._send(False)

    def step(self, event) -> list:
        self.now = event.now
        if self.inflight and self.now - self.sent_at >= self.timeout:
            self.retries += 1
            self.stats["timeouts"] += 1
            if self.retries > self.params.max_retries:
                self.aborted = True
                self.inflight = None
                return []
            return self._send(True)
        return []

    def receive(self, wire: bytes) -> list:
        body = check(wire)
        if body is None or self.inflight is None:
            return []
        kind, pid = struct.unpack(">BH", body[14:17])
        if kind != ACK or pid != self.inflight[0]:
            self.stats["ignored_events"] += 1
            return []
        self.index += 1
        self.retries = 0
        if self.index == len(self.chunks):
            self.inflight = None
            self.done = True
            return []
        self._load()
        return self._send(False)


class BaselineRelay:
    def __init__(self, node: int):
        self.node = node
        self.now = 0
        self.stats = Counter()

    def receive(self, wire: bytes) -> list:
        body = check(wire)
        if body is None:
            self.stats["fcs_drops"] += 1
            return []
        (ether_type,) = struct.unpack(">H", body[12:14])
        direction = DOWN if ether_type == ETHERTYPE_IPV4 else UP
        rest = body[14:]
        if ether_type == ETHERTYPE_IPV4:
            ttl = rest[8] - 1
            if ttl <= 0:
                self.stats["ttl_expired"] += 1
                return []
            hdr = rest[:8] + bytes([ttl]) + rest[9:10] + b"\0\0" + rest[12:20]
            hdr = hdr[:10] + struct.pack(">H", ipv4_checksum(hdr)) + hdr[12:]
            rest = hdr + rest[20:]
        return [(direction, _frame(self.node + direction, self.node, ether_type, rest))]


class BaselineReceiver:
    def __init__(self, node: int):
        self.node = node
        self.now = 0
        self.chunks: dict[int, bytes] = {}
        self.final_offset: Optional[int] = None
        self.stats = Counter()

    def receive(self, wire: bytes) -> list:
        body = check(wire)
        if body is None:
            self.stats["fcs_drops"] += 1
            return []
        ip = body[14:34]
        pid, flags_frag = struct.unpack(">HH", ip[4:8])
        offset = flags_frag & 0x1FFF
        self.chunks[offset] = body[34:]
        if not flags_frag & 0x2000:
            self.final_offset = offset
        return [(UP, build_control(ACK, self.node - 1, self.node, pid))]

    def delivered(self) -> bytes:
        if self.final_offset is None or any(i not in self.chunks for i in range(self.final_offset + 1)):
            return b""
        return reassemble([self.chunks[i] for i in range(self.final_offset + 1)])


def run_baseline_transfer(payload: bytes, hops: int = 0,
                          channels: Union[ChannelConfig, Sequence[ChannelConfig]] = ChannelConfig(),
                          params: Optional[EngineParams] = None, *, trace: Optional[Trace] = None) -> TransferReport:
    """Same topology and channels as :func:`~selfcorrect.engine.run_transfer`, FCS-discard rules.

    ``overhead_bytes`` is 1526 bytes per DATA retransmission.
    """
    if not payload:
        raise ValueError("payload must be non-empty")
    params = params or EngineParams()
    configs = _as_configs(channels, hops)
    last = hops + 1
    sender = BaselineSender(payload, last, params, params.timeout_ticks * (hops + 1))
    relays = [BaselineRelay(i) for i in range(1, last)]
    receiver = BaselineReceiver(last)
    down, up = make_links(configs)
    net = Network([sender, *relays, receiver], down, up, trace, kind_of=kind_of)
    ticks = net.run(sender, params.max_ticks)

    delivered = receiver.delivered() if sender.done else b""
    if not sender.done:
        status = "aborted"
    else:
        status = "delivered" if delivered == payload else "corrupted"
    retrans = sender.stats["retransmissions"]
    return TransferReport(
        status=status,
        payload_bytes=len(payload),
        delivered_bytes=len(delivered),
        data_chunks=len(sender.chunks),
        data_sent=sender.stats["data_sent"],
        data_retransmissions=retrans,
        hash_checks=0,
        hash_fails=0,
        naks=0,
        timeouts=sender.stats["timeouts"],
        frames_by_kind=dict(net.sent),
        overhead_bytes=DATA_WIRE * retrans,
        full_cost_bytes=sum(net.sent_bytes.values()),
        relay_payload_corrections=0,
        relay_header_corrections=0,
        receiver_corrections=0,
        padding_bytes=len(sender.chunks) * CONTENT - LENGTH_PREFIX - len(payload),
        ticks=ticks,
        delivered=delivered,
        channel_stats=[c.stats for pair in zip(down, up) for c in pair],
    )
