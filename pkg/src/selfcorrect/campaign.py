"""Seeded Monte Carlo campaigns over :func:`run_transfer` and the baseline."""
from __future__ import annotations

import math
import statistics
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .analytic import ScenarioParams, poisson_pmf, transfer_cost
from .baseline import run_baseline_transfer
from .channel import ChannelConfig
from .engine import DATA_WIRE, EngineParams, run_transfer

SCHEMA_VERSION = 1


@dataclass
class ExperimentConfig:
    ber: float = 1e-5
    loss: float = 0.0
    transfer_bytes: int = 1 << 20
    hops: int = 1
    seeds: list = field(default_factory=lambda: list(range(64)))
    max_retries: int = 16
    timeout_ticks: int = 8
    baseline: bool = False
    # "first": only the sender-side link is lossy, later hops are clean;
    # "all": every link uses ber/loss
    noisy: str = "first"
    tolerance: float = 0.10
    jobs: int = 1

    def __post_init__(self):
        if not 0.0 <= self.ber <= 1.0 or not 0.0 <= self.loss <= 1.0:
            raise ValueError("ber and loss must be in [0, 1]")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.hops < 0:
            raise ValueError("hops must be >= 0")
        if self.transfer_bytes < 1:
            raise ValueError("transfer size must be positive")
        if self.noisy not in ("first", "all"):
            raise ValueError("noisy must be 'first' or 'all'")

    def channels(self, seed: int) -> list:
        lossy = ChannelConfig(self.ber, self.loss, seed)
        clean = ChannelConfig(0.0, 0.0, seed)
        if self.noisy == "all":
            return [lossy] * (self.hops + 1)
        return [lossy] + [clean] * self.hops

    def engine_params(self) -> EngineParams:
        return EngineParams(timeout_ticks=self.timeout_ticks, max_retries=self.max_retries)


def payload_for(seed: int, size: int) -> bytes:
    return np.random.default_rng([seed, 0xDA7A]).bytes(size)


def run_seed(cfg: ExperimentConfig, seed: int) -> dict:
    payload = payload_for(seed, cfg.transfer_bytes)
    run = run_baseline_transfer if cfg.baseline else run_transfer
    report = run(payload, cfg.hops, cfg.channels(seed), cfg.engine_params())
    row = {"seed": seed, **report.summary()}
    # flipped-bit histogram of DATA frames on the sender-side downlink
    data_len = 1526 if cfg.baseline else DATA_WIRE
    row["data_error_histogram"] = {int(k): v for k, v in report.channel_stats[0].by_length.get(data_len, Counter()).items()}
    return row


@dataclass
class CampaignReport:
    config: dict
    rows: list
    mean_overhead: float
    stdev_overhead: float
    analytic_cost: float
    within_tolerance: bool
    aborted: int
    corrupted: int
    histogram: dict
    poisson_check: dict
    schema_version: int = SCHEMA_VERSION

    def as_dict(self) -> dict:
        return asdict(self)


def poisson_check(histogram: dict, lam: float, ks=(0, 1)) -> dict:
    """Compare empirical frequencies at ``ks`` to Poisson(lam), in standard errors."""
    n = sum(histogram.values())
    out = {"frames": n, "lambda": lam, "k": {}, "pass": n > 0}
    for k in ks:
        expected = poisson_pmf(k, lam)
        observed = histogram.get(k, 0) / n if n else 0.0
        se = math.sqrt(expected * (1 - expected) / n) if n else float("inf")
        z = (observed - expected) / se if se else 0.0
        out["k"][k] = {"observed": observed, "expected": expected, "stderr": se, "z": z}
        out["pass"] = out["pass"] and abs(z) <= 3.0
    return out


def run_campaign(cfg: ExperimentConfig) -> CampaignReport:
    seeds = sorted(cfg.seeds)
    if cfg.jobs > 1:
        with ProcessPoolExecutor(cfg.jobs) as pool:
            rows = list(pool.map(run_seed, [cfg] * len(seeds), seeds))
    else:
        rows = [run_seed(cfg, s) for s in seeds]
    rows.sort(key=lambda r: r["seed"])

    costs = [r["overhead_bytes"] for r in rows]
    mean = statistics.fmean(costs)
    stdev = statistics.stdev(costs) if len(costs) > 1 else 0.0
    analytic = transfer_cost(ScenarioParams(ber=cfg.ber, transfer_bytes=cfg.transfer_bytes))
    target = analytic.baseline_total if cfg.baseline else analytic.protocol_total
    within = abs(mean - target) <= cfg.tolerance * target if target else mean == 0

    hist = Counter()
    for r in rows:
        hist.update(r["data_error_histogram"])
    frame_bytes = 1526 if cfg.baseline else 4136
    return CampaignReport(
        config=asdict(cfg),
        rows=rows,
        mean_overhead=mean,
        stdev_overhead=stdev,
        analytic_cost=target,
        within_tolerance=within,
        aborted=sum(r["status"] == "aborted" for r in rows),
        corrupted=sum(r["status"] == "corrupted" for r in rows),
        histogram=dict(sorted(hist.items())),
        poisson_check=poisson_check(hist, cfg.ber * frame_bytes * 8),
    )
