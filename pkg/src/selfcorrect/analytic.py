"""Closed-form retransmission cost of the self-correcting scheme vs FCS discard.

Per-frame bit errors are Poisson with mean ``ber * frame_bits``. The
self-correcting frame costs a 40-byte digest check after one error and a
full retransmission after two or more; re-errors on the retransmission are
ignored. The FCS baseline retransmits after any error and sums the
geometric series of repeated failures, ``L * q / (1 - q)``.

The published figures were computed from probabilities rounded to three
decimals, so ``ScenarioParams.prob_digits`` defaults to 3. Set it to
``None`` for the unrounded model (191.66 instead of 191.5 B/packet).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from typing import Optional

from .hamming import MEDIUM, naive_scan_cost

MIB = 1 << 20


@dataclass(frozen=True)
class ScenarioParams:
    ber: float = 1e-5
    protocol_frame_bytes: int = 4136
    baseline_frame_bytes: int = 1526
    baseline_content_bytes: int = 1480
    protocol_content_bytes: int = 4094
    hash_check_bytes: int = 40
    transfer_bytes: int = MIB
    prob_digits: Optional[int] = 3
    whole_packets: bool = False

    def __post_init__(self):
        if not 0.0 <= self.ber <= 1.0:
            raise ValueError(f"ber must be in [0, 1], got {self.ber}")
        for name in ("protocol_frame_bytes", "baseline_frame_bytes", "baseline_content_bytes",
                     "protocol_content_bytes", "hash_check_bytes"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.transfer_bytes < 0:
            raise ValueError("transfer_bytes must be >= 0")

    def with_(self, **changes) -> "ScenarioParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class CostReport:
    p0: float
    p1: float
    p2plus: float
    baseline_p_err: float
    protocol_cost_per_packet: float
    baseline_cost_per_packet: float
    protocol_total: float
    baseline_total: float
    ratio: float

    def as_dict(self) -> dict:
        return asdict(self)


def error_probs(frame_bits: int, ber: float) -> tuple[float, float, float]:
    """Poisson probabilities of 0, 1 and >= 2 bit errors in one frame."""
    if frame_bits < 1:
        raise ValueError("frame_bits must be >= 1")
    if not 0.0 <= ber <= 1.0:
        raise ValueError("ber must be in [0, 1]")
    lam = ber * frame_bits
    p0 = math.exp(-lam)
    p1 = lam * p0
    return p0, p1, 1.0 - p0 - p1


def binomial_pmf(k: int, n: int, p: float) -> float:
    """Exact ``P[X = k]`` for ``X ~ Binomial(n, p)``, via log-space terms."""
    if p == 0.0:
        return 1.0 if k == 0 else 0.0
    if p == 1.0:
        return 1.0 if k == n else 0.0
    log = math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
    return math.exp(log + k * math.log(p) + (n - k) * math.log1p(-p))


def poisson_pmf(k: int, lam: float) -> float:
    return math.exp(-lam) * lam**k / math.factorial(k)


def _round(x: float, digits: Optional[int]) -> float:
    return x if digits is None else round(x, digits)


def protocol_probs(params: ScenarioParams) -> tuple[float, float, float]:
    p0, p1, p2 = error_probs(params.protocol_frame_bytes * 8, params.ber)
    if params.prob_digits is None:
        return p0, p1, p2
    p0, p1 = _round(p0, params.prob_digits), _round(p1, params.prob_digits)
    return p0, p1, 1.0 - p0 - p1


def baseline_p_err(params: ScenarioParams) -> float:
    p0, _, _ = error_probs(params.baseline_frame_bytes * 8, params.ber)
    return _round(1.0 - p0, params.prob_digits)


def retransmission_cost(p_err: float, frame_bytes: float) -> float:
    """Expected bytes re-sent per frame when each attempt fails with ``p_err``.

    A certain failure never completes, so ``p_err == 1`` costs ``inf``.
    """
    if not 0.0 <= p_err <= 1.0:
        raise ValueError("p_err must be in [0, 1]")
    if p_err == 1.0:
        return math.inf
    return p_err * frame_bytes / (1.0 - p_err)


def expected_cost_protocol(params: ScenarioParams = ScenarioParams()) -> float:
    _, p1, p2 = protocol_probs(params)
    return p1 * params.hash_check_bytes + p2 * params.protocol_frame_bytes


def expected_cost_baseline(params: ScenarioParams = ScenarioParams()) -> float:
    return retransmission_cost(baseline_p_err(params), params.baseline_frame_bytes)


def _total(per_packet: float, size: int, content: int, whole: bool) -> float:
    if size == 0:
        return 0.0
    return per_packet * (math.ceil(size / content) if whole else size / content)


def transfer_cost(params: ScenarioParams = ScenarioParams()) -> CostReport:
    """Per-packet and whole-transfer expected cost for both schemes."""
    p0, p1, p2 = protocol_probs(params)
    proto = expected_cost_protocol(params)
    base = expected_cost_baseline(params)
    size = params.transfer_bytes
    proto_total = _total(proto, size, params.protocol_content_bytes, params.whole_packets)
    base_total = _total(base, size, params.baseline_content_bytes, params.whole_packets)
    ratio = proto_total / base_total if base_total else float("nan")
    return CostReport(p0, p1, p2, baseline_p_err(params), proto, base, proto_total, base_total, ratio)


def payload_proportions(params: ScenarioParams = ScenarioParams()) -> tuple[float, float]:
    return (params.protocol_content_bytes / params.protocol_frame_bytes,
            params.baseline_content_bytes / params.baseline_frame_bytes)


MEDIUM_SCAN_OPS = naive_scan_cost(MEDIUM)  # 15 * 32768 = 491520


def xor_burden(rate_bytes_per_sec):
    """XOR operations per second to receive and re-send medium blocks at a rate.

    ``rate / 4096`` blocks per second, each scanned once on receive and
    once on send. Integer rates give an exact integer.
    """
    if rate_bytes_per_sec <= 0:
        raise ValueError("rate must be positive")
    ops = MEDIUM_SCAN_OPS * 2 * rate_bytes_per_sec
    if isinstance(rate_bytes_per_sec, int) and ops % MEDIUM.total_bytes == 0:
        return ops // MEDIUM.total_bytes
    return ops / MEDIUM.total_bytes
