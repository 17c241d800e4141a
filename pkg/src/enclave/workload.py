"""Seeded workload generation and spot-trace synthesis.

Both generators are pure functions of their arguments: the same seed always
produces the same jobs and the same price series.
"""
from __future__ import annotations

import random
from dataclasses import dataclass

from .cloudsim import SpotPriceTrace
from .errors import InvalidParams, InvalidSpec
from .simclock import HOUR

DEFAULT_MIX = ((1.0, 0.4), (3.0, 0.2), (4.0, 0.4))
DEFAULT_SIZES_GB = (1, 3, 5, 7, 9)


@dataclass(frozen=True)
class WorkloadSpec:
    job_count: int = 40
    window_hours: float = 4.0
    inter_arrival_mean_hours: float = 0.1
    mix: tuple[tuple[float, float], ...] = DEFAULT_MIX  # (duration hours, fraction)
    jitter_fraction: float = 0.05
    data_sizes_gb: tuple[int, ...] = DEFAULT_SIZES_GB
    seed: int = 0

    def validate(self) -> None:
        if self.job_count < 1:
            raise InvalidSpec("job_count must be >= 1")
        if self.inter_arrival_mean_hours <= 0:
            raise InvalidSpec("inter_arrival_mean_hours must be positive")
        if not self.mix:
            raise InvalidSpec("mix is empty")
        if abs(sum(frac for _, frac in self.mix) - 1.0) > 1e-9:
            raise InvalidSpec("mix fractions must sum to 1")
        if any(dur <= 0 or frac < 0 for dur, frac in self.mix):
            raise InvalidSpec("mix entries must have positive duration and fraction >= 0")
        if not 0 <= self.jitter_fraction < 1:
            raise InvalidSpec("jitter_fraction must be in [0, 1)")
        if not self.data_sizes_gb:
            raise InvalidSpec("data_sizes_gb is empty")


@dataclass(frozen=True)
class GeneratedJob:
    index: int
    arrival_time: float  # seconds from workload start
    nominal_duration: float  # seconds
    actual_duration: float  # seconds, nominal +/- jitter
    input_size_gb: int
    script: str


def export_descriptions(
    jobs: list["GeneratedJob"],
    owner: str,
    queue: str = "prod",
    dataset_bucket: str = "datasets",
) -> list[dict]:
    """Generated jobs as gateway-format job description JSON objects."""
    return [
        {
            "owner": owner,
            "queue": queue,
            "inputs": [f"{dataset_bucket}/in/{job.index:04d}"],
            "script": job.script,
            "outputs": ["result.bin"],
            "max_walltime_secs": 2.0 * job.nominal_duration,
        }
        for job in jobs
    ]


def duration_quotas(mix, job_count: int) -> list[int]:
    """Deterministic per-class job counts via largest remainder, summing to
    job_count exactly."""
    raw = [frac * job_count for _, frac in mix]
    counts = [int(x) for x in raw]
    remainders = sorted(
        range(len(mix)), key=lambda i: (raw[i] - counts[i], -i), reverse=True
    )
    short = job_count - sum(counts)
    for i in remainders[:short]:
        counts[i] += 1
    return counts


def generate(spec: WorkloadSpec) -> list[GeneratedJob]:
    """Produce the arrival schedule: exponential inter-arrival gaps, exact
    duration-class quotas, sizes drawn uniformly from the configured set."""
    spec.validate()
    rng = random.Random(spec.seed)
    mean_gap = spec.inter_arrival_mean_hours * HOUR

    durations: list[float] = []
    for (dur_hours, _), count in zip(spec.mix, duration_quotas(spec.mix, spec.job_count)):
        durations.extend([dur_hours * HOUR] * count)
    rng.shuffle(durations)

    jobs = []
    t = 0.0
    for i in range(spec.job_count):
        t += rng.expovariate(1.0 / mean_gap)
        nominal = durations[i]
        jitter = rng.uniform(1 - spec.jitter_fraction, 1 + spec.jitter_fraction)
        actual = nominal * jitter
        size = rng.choice(spec.data_sizes_gb)
        jobs.append(
            GeneratedJob(
                index=i,
                arrival_time=t,
                nominal_duration=nominal,
                actual_duration=actual,
                input_size_gb=size,
                script=f"sleep {actual:.3f}",
            )
        )
    return jobs


# --- spot price trace synthesis ---

DEFAULT_ZONE_LAYOUT = {
    "us-east-1": ("us-east-1a", "us-east-1b", "us-east-1c"),
    "us-west-2": ("us-west-2a", "us-west-2b", "us-west-2c"),
    "eu-west-1": ("eu-west-1a", "eu-west-1b"),
    "ap-southeast-1": ("ap-southeast-1a", "ap-southeast-1b"),
}


@dataclass(frozen=True)
class TraceSynthesisParams:
    zones: tuple[str, ...]
    instance_type: str
    base_price: float
    volatility: float
    duration_hours: int = 744  # 31 days
    interval_hours: float = 1.0
    start: float = 0.0
    reversion: float = 0.3
    spike_probability: float = 0.0  # per sample, price jumps above on-demand
    spike_price: float = 0.0
    zone_spread: float = 0.15  # per-zone offset of the mean level, as a fraction of base

    def validate(self) -> None:
        if not self.zones:
            raise InvalidParams("no zones")
        if self.base_price <= 0:
            raise InvalidParams("base_price must be positive")
        if self.volatility < 0:
            raise InvalidParams("volatility must be >= 0")
        if self.duration_hours < 1 or self.interval_hours <= 0:
            raise InvalidParams("bad duration/interval")
        if self.spike_probability and self.spike_price <= 0:
            raise InvalidParams("spike_probability needs a positive spike_price")


def synthesize_traces(seed: int, params: TraceSynthesisParams) -> list[SpotPriceTrace]:
    """Mean-reverting positive price series per zone, with optional spikes
    above the on-demand price so revocations can occur. volatility=0 yields
    a constant series at the base price."""
    params.validate()
    traces = []
    steps = int(params.duration_hours / params.interval_hours)
    for zone in params.zones:
        # string seed keeps zone streams independent and process-stable
        rng = random.Random(f"{seed}:{zone}:{params.instance_type}")
        if params.volatility == 0:
            level = params.base_price
        else:
            # deterministic per-zone level so zones differ persistently
            spread = params.zone_spread * params.base_price
            level = params.base_price + spread * (2 * rng.random() - 1)
        price = level
        samples = []
        for k in range(steps):
            ts = params.start + k * params.interval_hours * HOUR
            if params.volatility == 0:
                samples.append((ts, params.base_price))
                continue
            if params.spike_probability and rng.random() < params.spike_probability:
                sample_price = params.spike_price * rng.uniform(1.05, 1.6)
            else:
                noise = rng.gauss(0.0, params.volatility * params.base_price)
                price = price + params.reversion * (level - price) + noise
                price = max(price, 0.05 * params.base_price)
                sample_price = price
            samples.append((ts, round(sample_price, 6)))
        traces.append(SpotPriceTrace(zone=zone, instance_type=params.instance_type, samples=samples))
    return traces
