"""Memoryless lossy channel: whole-frame loss plus i.i.d. bit flips.

Randomness comes from numpy's PCG64 generator seeded with
``ChannelConfig.seed``. Each call to :meth:`Channel.transmit` draws, in
order: one uniform for loss; if kept, the flip count ``k ~ Binomial(n, p)``
over the ``n`` post-SFD bits; then ``k`` distinct positions. This has the
same distribution as flipping each bit independently with probability p.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

SYNC_BYTES = 8


@dataclass(frozen=True)
class ChannelConfig:
    ber: float = 0.0
    loss_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.ber <= 1.0:
            raise ValueError(f"ber must be in [0, 1], got {self.ber}")
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ValueError(f"loss_prob must be in [0, 1], got {self.loss_prob}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass
class ChannelStats:
    frames_sent: int = 0
    frames_lost: int = 0
    bits_flipped: int = 0
    histogram: Counter = field(default_factory=Counter)
    # flipped-bit histogram per wire length, so DATA frames can be told apart
    by_length: dict = field(default_factory=dict)

    def record(self, length: int, flips: int):
        self.histogram[flips] += 1
        self.by_length.setdefault(length, Counter())[flips] += 1
        self.bits_flipped += flips

    def fraction(self, k: int, length: Optional[int] = None) -> float:
        hist = self.histogram if length is None else self.by_length.get(length, Counter())
        total = sum(hist.values())
        return hist[k] / total if total else 0.0


class Channel:
    """One direction of one link. Owns its RNG; not thread-safe."""

    def __init__(self, cfg: ChannelConfig, rng: Optional[np.random.Generator] = None):
        self.cfg = cfg
        self.rng = rng if rng is not None else np.random.default_rng(cfg.seed)
        self.stats = ChannelStats()

    def transmit(self, wire: bytes) -> Optional[bytes]:
        """Return the received frame, or None if it was lost."""
        self.stats.frames_sent += 1
        if self.rng.random() < self.cfg.loss_prob:
            self.stats.frames_lost += 1
            return None
        out = self._corrupt(wire)
        out = self.inject(out)
        return out

    def _corrupt(self, wire: bytes) -> bytes:
        nbits = max(len(wire) - SYNC_BYTES, 0) * 8
        p = self.cfg.ber
        if p >= 1.0:
            k = nbits
        elif p <= 0.0 or nbits == 0:
            k = 0
        else:
            k = int(self.rng.binomial(nbits, p))
        self.stats.record(len(wire), k)
        if k == 0:
            return bytes(wire)
        buf = np.frombuffer(wire, dtype=np.uint8).copy()
        if k == nbits:
            buf[SYNC_BYTES:] ^= 0xFF
        else:
            pos = self.rng.choice(nbits, size=k, replace=False) + SYNC_BYTES * 8
            np.bitwise_xor.at(buf, pos >> 3, (0x80 >> (pos & 7)).astype(np.uint8))
        return buf.tobytes()

    def inject(self, wire: bytes) -> bytes:
        """Hook for deterministic fault injection; identity by default."""
        return wire


def transmit(wire: bytes, cfg: ChannelConfig, rng: np.random.Generator) -> Optional[bytes]:
    """Functional form of :meth:`Channel.transmit` with caller-owned RNG state."""
    return Channel(cfg, rng).transmit(wire)


def error_count_histogram(n_trials: int, frame_bits: int, cfg: ChannelConfig) -> ChannelStats:
    """Per-frame flipped-bit counts for ``n_trials`` frames of ``frame_bits`` bits.

    Uses the same loss-then-binomial draws as :class:`Channel`, vectorized.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    rng = np.random.default_rng(cfg.seed)
    lost = rng.random(n_trials) < cfg.loss_prob
    kept = int(n_trials - lost.sum())
    counts = rng.binomial(frame_bits, cfg.ber, size=kept)
    stats = ChannelStats(frames_sent=n_trials, frames_lost=n_trials - kept, bits_flipped=int(counts.sum()))
    values, freq = np.unique(counts, return_counts=True)
    stats.histogram = Counter({int(v): int(f) for v, f in zip(values, freq)})
    stats.by_length = {frame_bits // 8: Counter(stats.histogram)}
    return stats


class AliasChannel(Channel):
    """Channel that plants a 3-bit error in chosen DATA frames.

    The three flipped payload bits XOR to a fourth data position, so the
    decoder sees odd parity with that syndrome and "repairs" the wrong bit:
    a silent four-bit corruption that only a content digest can catch.
    """

    def __init__(self, cfg: ChannelConfig, frame_numbers, positions=(3, 5, 9), frame_length: int = 4136,
                 payload_offset: int = 40, rng=None):
        super().__init__(cfg, rng)
        self.frame_numbers = set(frame_numbers)
        self.positions = tuple(positions)
        self.frame_length = frame_length
        self.payload_offset = payload_offset
        self._seen = 0
        self.injected = 0

    def inject(self, wire: bytes) -> bytes:
        if len(wire) != self.frame_length:
            return wire
        n = self._seen
        self._seen += 1
        if n not in self.frame_numbers:
            return wire
        buf = bytearray(wire)
        for j in self.positions:
            buf[self.payload_offset + (j >> 3)] ^= 0x80 >> (j & 7)
        self.injected += 1
        return bytes(buf)
