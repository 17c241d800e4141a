"""Deterministic simulated cloud provider.

Models regions, availability zones, an instance catalog, on-demand and spot
markets, and the instance lifecycle (provisioning delay, spot revocation,
hourly billing). All state transitions are driven by an external tick loop;
given the same catalog, traces, seed, and tick the event sequence is
bit-identical across runs.
"""
from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .errors import (
    AlreadyEnded,
    BeforeTraceStart,
    NonPositiveBid,
    NoTrace,
    ParseError,
    UnknownInstance,
    UnknownType,
    UnknownZone,
)
from .simclock import HOUR, Clock, iso8601, parse_iso8601

PROVISIONING = "provisioning"
RUNNING = "running"
REVOKED = "revoked"
TERMINATED = "terminated"

ON_DEMAND = "on-demand"
SPOT = "spot"


@dataclass(frozen=True)
class Region:
    id: str
    zones: tuple[str, ...]

    def __post_init__(self):
        if not self.zones:
            raise ValueError(f"region {self.id} has no zones")


@dataclass(frozen=True)
class Zone:
    id: str
    region: str


@dataclass(frozen=True)
class InstanceTypeSpec:
    name: str
    vcpus: int
    memory_gib: float
    on_demand_price_per_hour: float

    def __post_init__(self):
        if self.vcpus < 1:
            raise ValueError("vcpus must be >= 1")
        if self.on_demand_price_per_hour <= 0:
            raise ValueError("on-demand price must be positive")


@dataclass(frozen=True)
class Market:
    """Purchase model for an instance: fixed hourly price, or a spot bid."""

    kind: str
    bid_per_hour: Optional[float] = None

    @classmethod
    def on_demand(cls) -> "Market":
        return cls(ON_DEMAND)

    @classmethod
    def spot(cls, bid_per_hour: float) -> "Market":
        return cls(SPOT, bid_per_hour)

    @property
    def is_spot(self) -> bool:
        return self.kind == SPOT


@dataclass
class SpotPriceTrace:
    """Hourly spot price series for one (zone, instance type) pair.

    The market price at time t is the last sample at or before t (a step
    function); asking before the first sample is an error.
    """

    zone: str
    instance_type: str
    samples: list[tuple[float, float]]

    def __post_init__(self):
        if not self.samples:
            raise ValueError("trace has no samples")
        prev = None
        for ts, price in self.samples:
            if prev is not None and ts <= prev:
                raise ValueError("trace timestamps must be strictly increasing")
            if price <= 0:
                raise ValueError("trace prices must be positive")
            prev = ts

    @property
    def start(self) -> float:
        return self.samples[0][0]

    def price_at(self, t: float) -> float:
        if t < self.start:
            raise BeforeTraceStart(
                f"t={t} precedes trace start {self.start} for {self.zone}/{self.instance_type}"
            )
        # binary search for the last sample <= t
        lo, hi = 0, len(self.samples) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self.samples[mid][0] <= t:
                lo = mid
            else:
                hi = mid - 1
        return self.samples[lo][1]


class DelayModel:
    """Provisioning delay distribution: request time to instance readiness."""

    def sample(self, rng: random.Random) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantDelay(DelayModel):
    seconds: float = 0.0

    def sample(self, rng: random.Random) -> float:
        return self.seconds


@dataclass(frozen=True)
class LognormalDelay(DelayModel):
    """Lognormal delay with a hard cap, parameterized by its (uncapped) mean."""

    mean_seconds: float = 459.0
    sigma: float = 0.5
    cap_seconds: float = 1800.0

    def sample(self, rng: random.Random) -> float:
        mu = math.log(self.mean_seconds) - self.sigma ** 2 / 2
        return min(rng.lognormvariate(mu, self.sigma), self.cap_seconds)


@dataclass
class Instance:
    id: str
    type_name: str
    zone: str
    market: Market
    state: str
    launch_time: float
    ready_time: float
    end_time: Optional[float] = None

    def billed_hours(self, now: float) -> int:
        """Whole billing hours consumed so far; partial hours round up."""
        if self.state == PROVISIONING:
            return 0
        end = self.end_time if self.end_time is not None else now
        if end <= self.ready_time:
            return 0
        return math.ceil((end - self.ready_time) / HOUR - 1e-9)

    @property
    def ended(self) -> bool:
        return self.state in (REVOKED, TERMINATED)


@dataclass(frozen=True)
class RevocationEvent:
    time: float
    instance_id: str
    zone: str
    instance_type: str
    market_price: float
    bid: float


@dataclass
class CloudProvider:
    """The simulator facade: catalog + markets + instance pool."""

    catalog: dict[str, InstanceTypeSpec]
    regions: list[Region]
    clock: Clock
    delay_model: DelayModel = field(default_factory=ConstantDelay)
    seed: int = 0

    def __post_init__(self):
        self.zones: dict[str, Zone] = {}
        for region in self.regions:
            for zid in region.zones:
                if zid in self.zones:
                    raise ValueError(f"zone id {zid} appears in two regions")
                self.zones[zid] = Zone(zid, region.id)
        self.traces: dict[tuple[str, str], SpotPriceTrace] = {}
        self.instances: dict[str, Instance] = {}
        self._rng = random.Random(self.seed)
        self._seq = 0

    # --- configuration ---

    def add_traces(self, traces: Iterable[SpotPriceTrace]) -> None:
        for trace in traces:
            if trace.zone not in self.zones:
                raise UnknownZone(trace.zone)
            if trace.instance_type not in self.catalog:
                raise UnknownType(trace.instance_type)
            self.traces[(trace.zone, trace.instance_type)] = trace

    def region_of(self, zone_id: str) -> str:
        if zone_id not in self.zones:
            raise UnknownZone(zone_id)
        return self.zones[zone_id].region

    # --- instance lifecycle ---

    def provision(
        self,
        type_name: str,
        zone_id: str,
        market: Market,
        delay_model: Optional[DelayModel] = None,
    ) -> Instance:
        if type_name not in self.catalog:
            raise UnknownType(type_name)
        if zone_id not in self.zones:
            raise UnknownZone(zone_id)
        if market.is_spot and (market.bid_per_hour is None or market.bid_per_hour <= 0):
            raise NonPositiveBid(f"bid={market.bid_per_hour}")
        now = self.clock.now
        delay = (delay_model or self.delay_model).sample(self._rng)
        self._seq += 1
        instance = Instance(
            id=f"i-{self._seq:05d}",
            type_name=type_name,
            zone=zone_id,
            market=market,
            state=PROVISIONING if delay > 0 else RUNNING,
            launch_time=now,
            ready_time=now + delay,
        )
        self.instances[instance.id] = instance
        return instance

    def market_price(self, zone_id: str, type_name: str, t: float) -> float:
        if zone_id not in self.zones:
            raise UnknownZone(zone_id)
        trace = self.traces.get((zone_id, type_name))
        if trace is None:
            raise NoTrace(f"{zone_id}/{type_name}")
        return trace.price_at(t)

    def poll_ready(self, t: float) -> list[Instance]:
        """Promote provisioning instances whose ready time has arrived."""
        ready = []
        for instance in self.instances.values():
            if instance.state == PROVISIONING and instance.ready_time <= t:
                instance.state = RUNNING
                ready.append(instance)
        return ready

    def step_markets(self, t: float) -> list[RevocationEvent]:
        """Advance markets to time t: promote ready instances, then revoke
        every running spot instance whose market price exceeds its bid."""
        self.poll_ready(t)
        events = []
        for instance in self.instances.values():
            if instance.state != RUNNING or not instance.market.is_spot:
                continue
            trace = self.traces.get((instance.zone, instance.type_name))
            if trace is None or t < trace.start:
                continue
            price = trace.price_at(t)
            if price > instance.market.bid_per_hour:
                instance.state = REVOKED
                instance.end_time = t
                events.append(
                    RevocationEvent(
                        time=t,
                        instance_id=instance.id,
                        zone=instance.zone,
                        instance_type=instance.type_name,
                        market_price=price,
                        bid=instance.market.bid_per_hour,
                    )
                )
        return events

    def force_revoke(self, instance_id: str, t: float) -> RevocationEvent:
        """Out-of-band spot revocation, used for fault injection."""
        instance = self._get(instance_id)
        if not instance.market.is_spot:
            raise ValueError("only spot instances can be revoked")
        if instance.ended:
            raise AlreadyEnded(instance_id)
        instance.state = REVOKED
        instance.end_time = t
        price = 0.0
        trace = self.traces.get((instance.zone, instance.type_name))
        if trace is not None and t >= trace.start:
            price = trace.price_at(t)
        return RevocationEvent(
            time=t,
            instance_id=instance.id,
            zone=instance.zone,
            instance_type=instance.type_name,
            market_price=price,
            bid=instance.market.bid_per_hour,
        )

    def terminate(self, instance_id: str, at: Optional[float] = None) -> Instance:
        """User-initiated termination, effective at ``at`` (>= now, defaults
        to now). Billing for the final partial hour is recorded."""
        instance = self._get(instance_id)
        if instance.ended:
            raise AlreadyEnded(instance_id)
        end = self.clock.now if at is None else at
        if end < self.clock.now:
            raise ValueError("cannot terminate in the past")
        instance.state = TERMINATED
        instance.end_time = end
        return instance

    def accrued_cost(self, instance_id: str, pricing: str = "on-demand-equivalent") -> float:
        """Cost of an instance so far.

        ``spot-trace`` sums the market price at each billed hour's start;
        ``on-demand-equivalent`` prices every billed hour at the catalog's
        fixed rate.
        """
        instance = self._get(instance_id)
        hours = instance.billed_hours(self.clock.now)
        if hours == 0:
            return 0.0
        if pricing == "on-demand-equivalent":
            return hours * self.catalog[instance.type_name].on_demand_price_per_hour
        if pricing == "spot-trace":
            trace = self.traces.get((instance.zone, instance.type_name))
            if trace is None:
                raise NoTrace(f"{instance.zone}/{instance.type_name}")
            return sum(
                trace.price_at(instance.ready_time + k * HOUR) for k in range(hours)
            )
        raise ValueError(f"unknown pricing mode: {pricing}")

    # --- views ---

    def instance(self, instance_id: str) -> Instance:
        return self._get(instance_id)

    def alive(self) -> list[Instance]:
        return [i for i in self.instances.values() if not i.ended]

    def running(self) -> list[Instance]:
        return [i for i in self.instances.values() if i.state == RUNNING]

    def _get(self, instance_id: str) -> Instance:
        instance = self.instances.get(instance_id)
        if instance is None:
            raise UnknownInstance(instance_id)
        return instance


# --- trace and catalog file formats ---

TRACE_HEADER = ["timestamp", "zone", "instance_type", "price"]


def load_traces(path: str) -> list[SpotPriceTrace]:
    """Read spot traces from CSV (``timestamp,zone,instance_type,price``)."""
    series: dict[tuple[str, str], list[tuple[float, float]]] = {}
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != TRACE_HEADER:
                raise ParseError(f"expected header {','.join(TRACE_HEADER)}")
            for row in reader:
                try:
                    ts = parse_iso8601(row["timestamp"])
                    price = float(row["price"])
                except (ValueError, TypeError, KeyError) as exc:
                    raise ParseError(f"bad trace row {row}: {exc}") from exc
                series.setdefault((row["zone"], row["instance_type"]), []).append((ts, price))
    except OSError as exc:
        raise ParseError(str(exc)) from exc
    traces = []
    for (zone, type_name), samples in series.items():
        try:
            traces.append(SpotPriceTrace(zone, type_name, samples))
        except ValueError as exc:
            raise ParseError(f"{zone}/{type_name}: {exc}") from exc
    return traces


def save_traces(traces: Iterable[SpotPriceTrace], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_HEADER)
        for trace in traces:
            for ts, price in trace.samples:
                writer.writerow([iso8601(ts), trace.zone, trace.instance_type, f"{price:.6f}"])


def load_catalog(config: dict) -> tuple[dict[str, InstanceTypeSpec], list[Region]]:
    """Build a catalog and region map from parsed configuration."""
    catalog = {}
    for entry in config.get("instance_types", []):
        spec = InstanceTypeSpec(
            name=entry["name"],
            vcpus=int(entry["vcpus"]),
            memory_gib=float(entry["memory_gib"]),
            on_demand_price_per_hour=float(entry["on_demand_price_per_hour"]),
        )
        catalog[spec.name] = spec
    regions = [
        Region(id=entry["id"], zones=tuple(entry["zones"]))
        for entry in config.get("regions", [])
    ]
    if not catalog or not regions:
        raise ParseError("catalog config needs instance_types and regions")
    return catalog, regions
