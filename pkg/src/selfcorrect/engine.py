"""Sender, relay and receiver state machines over a linear chain of links.

Topology: node 0 is the sender, node ``hops + 1`` the receiver, and every
node in between is a relay. Each link carries frames in both directions
through two independent :class:`~selfcorrect.channel.Channel` instances.
Frames take one logical tick per link.

Relays and the receiver repair single-bit errors in every block. A relay
that repairs the payload records ``position + 1`` in ``err_pos``; the
receiver then (or after its own repair) holds the chunk and asks the sender
to confirm the content digest before delivering it. Anything uncorrectable
is dropped with a NAK back to the sender. The sender keeps one DATA frame in
flight and retransmits it on NAK, digest mismatch, or timeout.
"""
from __future__ import annotations

import enum
import heapq
import struct
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .channel import Channel, ChannelConfig, ChannelStats
from .frames import (
    CONTENT_BYTES,
    FLAG_HEADER_CORRECTED,
    FLAG_MORE_FRAGMENTS,
    FrameError,
    FrameKind,
    L2Header,
    L3Header,
    build_frame,
    pack_hash_check,
    parse_frame,
    peek_kind,
    wire_length,
)

DOWN = 1  # toward the receiver
UP = -1  # toward the sender

LENGTH_PREFIX = 4
DATA_WIRE = wire_length(FrameKind.DATA)
HASH_CHECK_WIRE = wire_length(FrameKind.HASH_CHECK)
MAX_CHUNKS = 1 << 13

# FNV-1a, 64-bit (Fowler/Noll/Vo reference parameters).
FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1

Trace = Callable[[dict], None]


def fnv1a_64(data: bytes) -> int:
    h = FNV64_OFFSET
    for b in data:
        h = ((h ^ b) * FNV64_PRIME) & _MASK64
    return h


def digest(content: bytes) -> int:
    """64-bit FNV-1a digest of one 4094-byte chunk."""
    if len(content) != CONTENT_BYTES:
        raise ValueError(f"digest expects {CONTENT_BYTES} bytes, got {len(content)}")
    return fnv1a_64(content)


def mac_of(node: int) -> bytes:
    return bytes([0x02, 0, 0, 0, node >> 8 & 0xFF, node & 0xFF])


def ip_of(node: int) -> bytes:
    return bytes([10, 0, node >> 8 & 0xFF, node & 0xFF])


def chunk_payload(payload: bytes, size: int = CONTENT_BYTES) -> list[bytes]:
    """Split ``payload`` into ``size``-byte chunks.

    The last chunk starts with the 4-byte big-endian total length, so the
    receiver can strip the zero padding.
    """
    room = size - LENGTH_PREFIX
    chunks = []
    i = 0
    while len(payload) - i > room:
        chunks.append(payload[i : i + size].ljust(size, b"\0"))
        i += size
    chunks.append((struct.pack(">I", len(payload)) + payload[i:]).ljust(size, b"\0"))
    return chunks


def reassemble(chunks: Sequence[bytes]) -> bytes:
    (total,) = struct.unpack(">I", chunks[-1][:LENGTH_PREFIX])
    body = b"".join(chunks[:-1]) + chunks[-1][LENGTH_PREFIX:]
    return body[:total]


@dataclass
class EngineParams:
    timeout_ticks: int = 8  # per hop round trip
    max_retries: int = 16
    ttl: int = 64
    # relays mark header repairs so the receiver also verifies those frames
    header_check: bool = False
    max_ticks: int = 10_000_000


# -- sender events ----------------------------------------------------------

@dataclass(frozen=True)
class Tick:
    now: int


@dataclass(frozen=True)
class Ack:
    id: int


@dataclass(frozen=True)
class Nak:
    id: int


@dataclass(frozen=True)
class HashCheck:
    id: int
    digest: int


SenderEvent = Union[Tick, Ack, Nak, HashCheck]


class Action(enum.Enum):
    FORWARD = "forward"
    ACK = "ack"
    HASH_CHECK = "hash_check"
    DROP_NAK = "drop_nak"
    DROP = "drop"
    DELIVER = "deliver"
    NONE = "none"


@dataclass
class RelayAction:
    kind: Action
    frames: list = field(default_factory=list)  # (direction, wire)


@dataclass
class ReceiverAction:
    kind: Action
    frames: list = field(default_factory=list)  # (direction, wire)


def _control(kind: FrameKind, node: int, to: int, ref: int) -> bytes:
    return build_frame(kind, L2Header(mac_of(to), mac_of(node), kind, ref))


class Sender:
    """Stop-and-wait sender: one DATA frame in flight at a time."""

    def __init__(self, payload: bytes, dst: int, params: Optional[EngineParams] = None, *,
                 node: int = 0, transfer_id: int = 1, first_id: int = 1, timeout: Optional[int] = None,
                 trace: Optional[Trace] = None):
        if not payload:
            raise ValueError("payload must be non-empty")
        self.params = params or EngineParams()
        self.chunks = chunk_payload(payload)
        if len(self.chunks) > MAX_CHUNKS:
            raise ValueError(f"payload needs {len(self.chunks)} chunks; offsets cover {MAX_CHUNKS}")
        self.node = node
        self.dst = dst
        self.transfer_id = transfer_id
        self.first_id = first_id
        self.timeout = timeout if timeout is not None else self.params.timeout_ticks
        self.trace = trace

        self.index = 0
        self.inflight: Optional[tuple[int, bytes, int]] = None  # id, wire, digest
        self.retries = 0
        self.sent_at = 0
        self.now = 0
        self.done = False
        self.aborted = False
        self.stats = Counter()

    @property
    def finished(self) -> bool:
        return self.done or self.aborted

    def packet_id(self, index: int) -> int:
        return (self.first_id + index - 1) % 0xFFFF + 1

    def _data_frame(self, index: int) -> tuple[int, bytes, int]:
        content = self.chunks[index]
        pid = self.packet_id(index)
        flag = FLAG_MORE_FRAGMENTS if index < len(self.chunks) - 1 else 0
        l3 = L3Header(ip_of(self.node), ip_of(self.dst), pid, flag, index, self.params.ttl, 0)
        l2 = L2Header(mac_of(self.node + 1), mac_of(self.node), FrameKind.DATA, 0)
        return pid, build_frame(FrameKind.DATA, l2, l3, content), digest(content)

    def _send_current(self, retransmit: bool) -> list:
        self.sent_at = self.now
        self.stats["data_sent"] += 1
        if retransmit:
            self.stats["retransmissions"] += 1
        self._log("data", kind="DATA", id=self.inflight[0], retransmit=retransmit)
        return [(DOWN, self.inflight[1])]

    def _retransmit(self, why: str) -> list:
        self.retries += 1
        self.stats[why] += 1
        if self.retries > self.params.max_retries:
            self.aborted = True
            self._log("abort", id=self.inflight[0])
            self.inflight = None
            return []
        return self._send_current(retransmit=True)

    def start(self, now: int = 0) -> list:
        self.now = now
        self.inflight = self._data_frame(0)
        return self._send_current(retransmit=False)

    def step(self, event: SenderEvent) -> list:
        """Advance on one event; returns ``(direction, wire)`` pairs to send."""
        if isinstance(event, Tick):
            self.now = event.now
            if self.inflight and self.now - self.sent_at >= self.timeout:
                return self._retransmit("timeouts")
            return []
        if self.inflight is None or event.id != self.inflight[0]:
            self.stats["ignored_events"] += 1
            return []
        pid = self.inflight[0]
        if isinstance(event, Ack):
            self._log("acked", kind="ACK", id=pid)
            self.index += 1
            self.retries = 0
            if self.index == len(self.chunks):
                self.inflight = None
                self.done = True
                self.stats["eof_sent"] += 1
                return [(DOWN, _control(FrameKind.EOF, self.node, self.node + 1, self.transfer_id))]
            self.inflight = self._data_frame(self.index)
            return self._send_current(retransmit=False)
        if isinstance(event, Nak):
            return self._retransmit("naks")
        if isinstance(event, HashCheck):
            if event.digest == self.inflight[2]:
                self.stats["hash_ok"] += 1
                self.sent_at = self.now
                return [(DOWN, _control(FrameKind.HASH_OK, self.node, self.node + 1, pid))]
            self.stats["hash_fail"] += 1
            fail = [(DOWN, _control(FrameKind.HASH_FAIL, self.node, self.node + 1, pid))]
            return fail + self._retransmit("hash_mismatch")
        raise TypeError(f"unknown event {event!r}")

    def receive(self, wire: bytes) -> list:
        try:
            parsed = parse_frame(wire)
        except FrameError:
            self.stats["malformed"] += 1
            return []
        if parsed.uncorrectable:
            self.stats["dropped_control"] += 1
            return []
        frame = parsed.frame
        if frame.kind is FrameKind.ACK:
            event = Ack(frame.l2.preserved)
        elif frame.kind is FrameKind.NAK:
            event = Nak(frame.l2.preserved)
        elif frame.kind is FrameKind.HASH_CHECK:
            event = HashCheck(frame.check_id, frame.digest)
        else:
            self.stats["ignored_events"] += 1
            return []
        return self.step(event)

    def _log(self, event: str, **fields):
        if self.trace:
            self.trace({"tick": self.now, "node": self.node, "event": event, **fields})


class Relay:
    """Verify, repair and forward; NAK upstream on anything uncorrectable."""

    def __init__(self, node: int, params: Optional[EngineParams] = None, trace: Optional[Trace] = None):
        self.node = node
        self.params = params or EngineParams()
        self.trace = trace
        self.now = 0
        self.stats = Counter()

    def process(self, wire: bytes) -> RelayAction:
        try:
            parsed = parse_frame(wire)
        except FrameError:
            self.stats["malformed"] += 1
            return RelayAction(Action.DROP)
        frame = parsed.frame
        kind = frame.kind
        if kind is not FrameKind.DATA:
            if parsed.uncorrectable:
                self.stats["dropped_control"] += 1
                return RelayAction(Action.DROP)
            direction = UP if kind in (FrameKind.ACK, FrameKind.NAK, FrameKind.HASH_CHECK) else DOWN
            l2 = L2Header(mac_of(self.node + direction), mac_of(self.node), kind, frame.l2.preserved)
            return RelayAction(Action.FORWARD, [(direction, build_frame(kind, l2, None, frame.content))])

        l3 = frame.l3
        if parsed.uncorrectable:
            self.stats["uncorrectable"] += 1
            self._log("drop", kind="DATA", id=l3.id, outcome="uncorrectable")
            return RelayAction(Action.DROP_NAK, [(UP, _control(FrameKind.NAK, self.node, self.node - 1, l3.id))])
        ttl = l3.ttl - 1
        if ttl <= 0:
            self.stats["ttl_expired"] += 1
            self._log("drop", kind="DATA", id=l3.id, outcome="ttl")
            return RelayAction(Action.DROP)
        err_pos = l3.err_pos
        flag = l3.flag
        l2_out, l3_out, payload_out = parsed.outcomes
        if payload_out.corrected:
            err_pos = payload_out.position + 1
            self.stats["payload_corrections"] += 1
            self._log("correct", kind="DATA", id=l3.id, outcome="payload", position=payload_out.position)
        if l2_out.corrected or l3_out.corrected:
            self.stats["header_corrections"] += 1
            self._log("correct", kind="DATA", id=l3.id, outcome="header")
            if self.params.header_check:
                flag |= FLAG_HEADER_CORRECTED
        new_l3 = L3Header(l3.src_ip, l3.dst_ip, l3.id, flag, l3.offset, ttl, err_pos)
        l2 = L2Header(mac_of(self.node + 1), mac_of(self.node), FrameKind.DATA, 0)
        out = build_frame(FrameKind.DATA, l2, new_l3, frame.content)
        self.stats["forwarded"] += 1
        return RelayAction(Action.FORWARD, [(DOWN, out)])

    def receive(self, wire: bytes) -> list:
        return self.process(wire).frames

    def _log(self, event: str, **fields):
        if self.trace:
            self.trace({"tick": self.now, "node": self.node, "event": event, **fields})


class Receiver:
    """Reassembles chunks; verifies repaired chunks by digest before delivery."""

    def __init__(self, node: int, params: Optional[EngineParams] = None, trace: Optional[Trace] = None):
        self.node = node
        self.params = params or EngineParams()
        self.trace = trace
        self.now = 0
        self.held: dict[int, tuple[int, bytes, bool]] = {}  # id -> (offset, content, final)
        self.chunks: dict[int, bytes] = {}  # offset -> content
        self.delivered_ids: set[int] = set()
        self.final_offset: Optional[int] = None
        self.eof = False
        self.stats = Counter()

    def _deliver(self, pid: int, offset: int, content: bytes, final: bool):
        self.chunks[offset] = content
        self.delivered_ids.add(pid)
        if final:
            self.final_offset = offset
        self.stats["delivered_chunks"] += 1
        self._log("deliver", kind="DATA", id=pid, offset=offset)

    def _reply(self, kind: FrameKind, ref: int) -> tuple[int, bytes]:
        return UP, _control(kind, self.node, self.node - 1, ref)

    def process(self, wire: bytes) -> ReceiverAction:
        try:
            parsed = parse_frame(wire)
        except FrameError:
            self.stats["malformed"] += 1
            return ReceiverAction(Action.DROP)
        frame = parsed.frame
        if frame.kind is not FrameKind.DATA:
            return self._control(parsed)

        l3 = frame.l3
        if parsed.uncorrectable:
            self.stats["uncorrectable"] += 1
            self._log("drop", kind="DATA", id=l3.id, outcome="uncorrectable")
            return ReceiverAction(Action.DROP_NAK, [self._reply(FrameKind.NAK, l3.id)])
        if l3.id in self.delivered_ids:
            self.stats["duplicates"] += 1
            return ReceiverAction(Action.ACK, [self._reply(FrameKind.ACK, l3.id)])
        if parsed.corrections:
            self.stats["local_corrections"] += 1
            self._log("correct", kind="DATA", id=l3.id, outcome="local", blocks=parsed.corrections)
        if parsed.corrections or l3.err_pos or l3.flag & FLAG_HEADER_CORRECTED:
            self.held[l3.id] = (l3.offset, frame.content, not l3.more_fragments)
            body = pack_hash_check(l3.id, digest(frame.content))
            self.stats["hash_checks"] += 1
            self._log("hash_check", kind="DATA", id=l3.id, err_pos=l3.err_pos)
            l2 = L2Header(mac_of(self.node - 1), mac_of(self.node), FrameKind.HASH_CHECK, l3.id)
            return ReceiverAction(Action.HASH_CHECK, [(UP, build_frame(FrameKind.HASH_CHECK, l2, None, body))])
        self._deliver(l3.id, l3.offset, frame.content, not l3.more_fragments)
        return ReceiverAction(Action.ACK, [self._reply(FrameKind.ACK, l3.id)])

    def _control(self, parsed) -> ReceiverAction:
        if parsed.uncorrectable:
            self.stats["dropped_control"] += 1
            return ReceiverAction(Action.DROP)
        kind = parsed.frame.kind
        ref = parsed.frame.l2.preserved
        if kind is FrameKind.HASH_OK:
            if ref in self.held:
                offset, content, final = self.held.pop(ref)
                self._deliver(ref, offset, content, final)
            if ref in self.delivered_ids:
                return ReceiverAction(Action.DELIVER, [self._reply(FrameKind.ACK, ref)])
            return ReceiverAction(Action.NONE)
        if kind is FrameKind.HASH_FAIL:
            self.held.pop(ref, None)
            self.stats["hash_fail"] += 1
            return ReceiverAction(Action.DROP)
        if kind is FrameKind.EOF:
            self.eof = True
            return ReceiverAction(Action.NONE)
        self.stats["ignored"] += 1
        return ReceiverAction(Action.NONE)

    def receive(self, wire: bytes) -> list:
        return self.process(wire).frames

    @property
    def complete(self) -> bool:
        return self.final_offset is not None and all(i in self.chunks for i in range(self.final_offset + 1))

    def delivered(self) -> bytes:
        if not self.complete:
            return b""
        return reassemble([self.chunks[i] for i in range(self.final_offset + 1)])

    def _log(self, event: str, **fields):
        if self.trace:
            self.trace({"tick": self.now, "node": self.node, "event": event, **fields})


def relay_process(wire: bytes, node: int = 1, params: Optional[EngineParams] = None) -> RelayAction:
    return Relay(node, params).process(wire)


def receiver_process(wire: bytes, state: Receiver) -> ReceiverAction:
    return state.process(wire)


def sender_step(event: SenderEvent, state: Sender) -> list:
    return state.step(event)


# -- event loop -------------------------------------------------------------

def _kind_of(wire: bytes) -> str:
    return peek_kind(wire)


class Network:
    """Linear chain of nodes joined by per-direction channels."""

    def __init__(self, nodes: list, down: list[Channel], up: list[Channel], trace: Optional[Trace] = None,
                 kind_of: Callable[[bytes], str] = _kind_of):
        if not (len(down) == len(up) == len(nodes) - 1):
            raise ValueError("need one channel per direction per link")
        self.nodes = nodes
        self.down = down
        self.up = up
        self.trace = trace
        self.kind_of = kind_of
        self.queue: list = []
        self._seq = 0
        self.now = 0
        self.sent = Counter()
        self.sent_bytes = Counter()

    def send(self, src: int, direction: int, wire: bytes):
        link = self.down[src] if direction == DOWN else self.up[src - 1]
        kind = self.kind_of(wire)
        self.sent[kind] += 1
        self.sent_bytes[kind] += len(wire)
        out = link.transmit(wire)
        if self.trace:
            self.trace({"tick": self.now, "node": src, "event": "send" if out is not None else "lost",
                        "kind": kind, "to": src + direction, "bytes": len(wire)})
        if out is not None:
            self._seq += 1
            heapq.heappush(self.queue, (self.now + 1, self._seq, src + direction, out))

    def run(self, sender, max_ticks: int) -> int:
        for direction, wire in sender.start(0):
            self.send(0, direction, wire)
        while True:
            if sender.finished and not self.queue:
                break
            next_event = self.queue[0][0] if self.queue else None
            deadline = sender.sent_at + sender.timeout if sender.inflight else None
            candidates = [t for t in (next_event, deadline) if t is not None]
            if not candidates:
                break
            self.now = max(self.now, min(candidates))
            if self.now > max_ticks:
                sender.aborted = True
                break
            while self.queue and self.queue[0][0] == self.now:
                _, _, dst, wire = heapq.heappop(self.queue)
                node = self.nodes[dst]
                node.now = self.now
                for direction, out in node.receive(wire):
                    self.send(dst, direction, out)
            if not sender.finished:
                for direction, out in sender.step(Tick(self.now)):
                    self.send(0, direction, out)
        return self.now


def make_links(configs: Sequence[ChannelConfig], channel_factory=None) -> tuple[list, list]:
    """Build down/up channels, one pair per link, with independent RNG streams."""
    down, up = [], []
    for i, cfg in enumerate(configs):
        streams = np.random.SeedSequence([cfg.seed, i]).spawn(2)
        make = channel_factory or (lambda c, rng, direction, link: Channel(c, rng))
        down.append(make(cfg, np.random.default_rng(streams[0]), DOWN, i))
        up.append(make(cfg, np.random.default_rng(streams[1]), UP, i))
    return down, up


@dataclass
class TransferReport:
    status: str  # "delivered", "aborted" or "corrupted"
    payload_bytes: int
    delivered_bytes: int
    data_chunks: int
    data_sent: int
    data_retransmissions: int
    hash_checks: int
    hash_fails: int
    naks: int
    timeouts: int
    frames_by_kind: dict
    overhead_bytes: int
    full_cost_bytes: int
    relay_payload_corrections: int
    relay_header_corrections: int
    receiver_corrections: int
    padding_bytes: int
    ticks: int
    delivered: bytes = field(default=b"", repr=False)
    channel_stats: list = field(default_factory=list, repr=False)

    @property
    def success(self) -> bool:
        return self.status == "delivered"

    def summary(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k not in ("delivered", "channel_stats")}
        d["frames_by_kind"] = dict(self.frames_by_kind)
        return d


def _as_configs(channels, hops: int) -> list[ChannelConfig]:
    if isinstance(channels, ChannelConfig):
        return [channels] * (hops + 1)
    channels = list(channels)
    if len(channels) != hops + 1:
        raise ValueError(f"{hops} relays need {hops + 1} channel configs, got {len(channels)}")
    return channels


def run_transfer(payload: bytes, hops: int = 0, channels: Union[ChannelConfig, Sequence[ChannelConfig]] = ChannelConfig(),
                 params: Optional[EngineParams] = None, *, trace: Optional[Trace] = None,
                 channel_factory=None) -> TransferReport:
    """Send ``payload`` across ``hops`` relays and report what it cost.

    ``channels`` is one config for every link or a list with one per link
    (sender side first). ``overhead_bytes`` counts only 40 bytes per digest
    check plus one DATA frame per retransmission; ``full_cost_bytes`` counts
    every frame put on any link.
    """
    if not payload:
        raise ValueError("payload must be non-empty")
    if hops < 0:
        raise ValueError("hops must be >= 0")
    params = params or EngineParams()
    configs = _as_configs(channels, hops)
    last = hops + 1
    timeout = params.timeout_ticks * (hops + 1)
    sender = Sender(payload, last, params, timeout=timeout, trace=trace)
    relays = [Relay(i, params, trace) for i in range(1, last)]
    receiver = Receiver(last, params, trace)
    down, up = make_links(configs, channel_factory)
    net = Network([sender, *relays, receiver], down, up, trace)
    ticks = net.run(sender, params.max_ticks)

    delivered = receiver.delivered() if sender.done else b""
    if not sender.done:
        status = "aborted"
    else:
        status = "delivered" if delivered == payload else "corrupted"
    hash_checks = receiver.stats["hash_checks"]
    retrans = sender.stats["retransmissions"]
    return TransferReport(
        status=status,
        payload_bytes=len(payload),
        delivered_bytes=len(delivered),
        data_chunks=len(sender.chunks),
        data_sent=sender.stats["data_sent"],
        data_retransmissions=retrans,
        hash_checks=hash_checks,
        hash_fails=sender.stats["hash_fail"],
        naks=sender.stats["naks"],
        timeouts=sender.stats["timeouts"],
        frames_by_kind=dict(net.sent),
        overhead_bytes=HASH_CHECK_WIRE * hash_checks + DATA_WIRE * retrans,
        full_cost_bytes=sum(net.sent_bytes.values()),
        relay_payload_corrections=sum(r.stats["payload_corrections"] for r in relays),
        relay_header_corrections=sum(r.stats["header_corrections"] for r in relays),
        receiver_corrections=receiver.stats["local_corrections"],
        padding_bytes=len(sender.chunks) * CONTENT_BYTES - LENGTH_PREFIX - len(payload),
        ticks=ticks,
        delivered=delivered,
        channel_stats=[c.stats for pair in zip(down, up) for c in pair],
    )
