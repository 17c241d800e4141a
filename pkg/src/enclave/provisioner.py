"""Elastic scaling and cost-aware placement.

One provisioner owns one pool (the on-demand dev pool or the spot prod
pool). Scaling targets one instance per waiting-or-running job, clamped by
the strategy; surplus idle instances are released only when they reach a
billing-hour boundary, since an earlier exit pays for capacity anyway.
Placement picks the zone minimizing hourly price plus inter-region data
transfer.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

from .cloudsim import CloudProvider, Instance, Market, RUNNING
from .errors import InvalidParams, NegativeVolume, NoCandidates
from .simclock import HOUR

DEFAULT_TRANSFER_COST_PER_GB = 0.020

NO_SCALING = "no-scaling"
LIMITED = "limited"
UNLIMITED = "unlimited"


@dataclass(frozen=True)
class ScalingStrategy:
    kind: str
    fixed: int = 0
    min_size: int = 0
    max_size: Optional[int] = None

    @classmethod
    def no_scaling(cls, fixed: int) -> "ScalingStrategy":
        if fixed < 1:
            raise InvalidParams("fixed pool size must be >= 1")
        return cls(NO_SCALING, fixed=fixed)

    @classmethod
    def limited(cls, max_size: int, min_size: int = 0) -> "ScalingStrategy":
        if min_size < 0 or max_size < max(min_size, 1):
            raise InvalidParams("need 0 <= min <= max and max >= 1")
        return cls(LIMITED, min_size=min_size, max_size=max_size)

    @classmethod
    def unlimited(cls, min_size: int = 0) -> "ScalingStrategy":
        if min_size < 0:
            raise InvalidParams("min must be >= 0")
        return cls(UNLIMITED, min_size=min_size)

    @property
    def label(self) -> str:
        if self.kind == NO_SCALING:
            return f"no-scaling({self.fixed})"
        if self.kind == LIMITED:
            return f"limited({self.max_size})"
        return "unlimited"

    def target(self, need: int) -> int:
        if self.kind == NO_SCALING:
            return self.fixed
        target = max(self.min_size, need)
        if self.kind == LIMITED:
            target = min(target, self.max_size)
        return target


@dataclass(frozen=True)
class BidPolicy:
    kind: str  # "static" | "fraction-of-on-demand"
    value: float

    @classmethod
    def static(cls, price: float) -> "BidPolicy":
        if price <= 0:
            raise InvalidParams("static bid must be positive")
        return cls("static", price)

    @classmethod
    def fraction_of_on_demand(cls, fraction: float = 1.0) -> "BidPolicy":
        if not 0 < fraction <= 1.0:
            raise InvalidParams("fraction must be in (0, 1]")
        return cls("fraction-of-on-demand", fraction)

    def bid_for(self, on_demand_price: float) -> float:
        if self.kind == "static":
            return self.value
        return self.value * on_demand_price


@dataclass(frozen=True)
class PlacementScope:
    kind: str  # "single-zone" | "cross-zone" | "cross-region"
    zone: Optional[str] = None
    region: Optional[str] = None
    regions: tuple[str, ...] = ()

    @classmethod
    def single_zone(cls, zone: str) -> "PlacementScope":
        return cls("single-zone", zone=zone)

    @classmethod
    def cross_zone(cls, region: str) -> "PlacementScope":
        return cls("cross-zone", region=region)

    @classmethod
    def cross_region(cls, regions: Iterable[str]) -> "PlacementScope":
        regions = tuple(regions)
        if not regions:
            raise InvalidParams("cross-region scope needs at least one region")
        return cls("cross-region", regions=regions)

    def candidate_zones(self, provider: CloudProvider) -> list[str]:
        if self.kind == "single-zone":
            return [self.zone] if self.zone in provider.zones else []
        if self.kind == "cross-zone":
            return sorted(z for z, zone in provider.zones.items() if zone.region == self.region)
        return sorted(
            z for z, zone in provider.zones.items() if zone.region in self.regions
        )


@dataclass(frozen=True)
class CostQuote:
    zone: str
    instance_type: str
    hourly_price: float  # P_i
    transfer_cost: float  # P_transfer
    total: float  # P_total = P_i + P_transfer, exactly


def transfer_cost(
    compute_region: str,
    data_region: str,
    d_down_gb: float,
    d_up_gb: float,
    cost_per_gb: float = DEFAULT_TRANSFER_COST_PER_GB,
) -> float:
    """Inter-region data transfer cost: zero when compute runs where the data
    lives, otherwise every gigabyte in and out pays the per-GB rate."""
    if d_down_gb < 0 or d_up_gb < 0:
        raise NegativeVolume(f"d_down={d_down_gb}, d_up={d_up_gb}")
    if cost_per_gb < 0:
        raise NegativeVolume(f"cost_per_gb={cost_per_gb}")
    if compute_region == data_region:
        return 0.0
    return (d_down_gb + d_up_gb) * cost_per_gb


@dataclass(frozen=True)
class ProvisionAction:
    time: float
    instance_id: str
    zone: str
    market: str
    bid: Optional[float]


@dataclass(frozen=True)
class TerminateAction:
    time: float
    instance_id: str
    effective_at: float


class Provisioner:
    """Pool manager: provisions via cost quotes, releases idle capacity at
    billing-hour boundaries, replaces revoked fixed-pool instances."""

    def __init__(
        self,
        provider: CloudProvider,
        instance_type: str,
        market_kind: str,  # "spot" | "on-demand"
        scope: PlacementScope,
        bid_policy: Optional[BidPolicy] = None,
        data_region: Optional[str] = None,
        transfer_cost_per_gb: float = DEFAULT_TRANSFER_COST_PER_GB,
    ):
        self.provider = provider
        self.instance_type = instance_type
        self.market_kind = market_kind
        self.scope = scope
        self.bid_policy = bid_policy or BidPolicy.fraction_of_on_demand(1.0)
        self.data_region = data_region
        self.transfer_cost_per_gb = transfer_cost_per_gb
        self.pool: set[str] = set()

    # --- placement ---

    def quote(
        self,
        t: float,
        d_down_gb: float = 0.0,
        d_up_gb: float = 0.0,
        scope: Optional[PlacementScope] = None,
        instance_type: Optional[str] = None,
    ) -> CostQuote:
        """Cheapest candidate zone by hourly price plus transfer cost; ties
        break toward the lexicographically first zone id."""
        scope = scope or self.scope
        type_name = instance_type or self.instance_type
        spec = self.provider.catalog.get(type_name)
        if spec is None:
            raise NoCandidates(f"unknown type {type_name}")
        best: Optional[CostQuote] = None
        for zone_id in scope.candidate_zones(self.provider):
            if self.market_kind == "spot":
                trace = self.provider.traces.get((zone_id, type_name))
                if trace is None or t < trace.start:
                    continue
                price = trace.price_at(t)
            else:
                price = spec.on_demand_price_per_hour
            xfer = 0.0
            if self.data_region is not None:
                xfer = transfer_cost(
                    self.provider.region_of(zone_id),
                    self.data_region,
                    d_down_gb,
                    d_up_gb,
                    self.transfer_cost_per_gb,
                )
            quote = CostQuote(zone_id, type_name, price, xfer, price + xfer)
            if best is None or quote.total < best.total:
                best = quote
        if best is None:
            raise NoCandidates(f"no zone in scope has a price for {type_name} at t={t}")
        return best

    # --- scaling ---

    def scale_pass(
        self,
        strategy: ScalingStrategy,
        pending_count: int,
        active_count: int,
        idle_instance_ids: Iterable[str],
        t: float,
        tick: float,
        d_down_gb: float = 0.0,
        d_up_gb: float = 0.0,
    ) -> list[ProvisionAction | TerminateAction]:
        """One scaling step: top up to the strategy target (one instance per
        waiting or running job), then release surplus idle instances whose
        billing-hour boundary falls inside this tick."""
        self.pool = {
            iid for iid in self.pool if not self.provider.instances[iid].ended
        }
        alive = [self.provider.instances[iid] for iid in sorted(self.pool)]
        target = strategy.target(active_count + pending_count)
        actions: list[ProvisionAction | TerminateAction] = []

        deficit = target - len(alive)
        for _ in range(max(0, deficit)):
            actions.append(self._provision_one(t, d_down_gb, d_up_gb))

        if strategy.kind == NO_SCALING:
            return actions

        surplus = len(alive) - target
        if surplus <= 0:
            return actions
        idle = sorted(set(idle_instance_ids) & self.pool)
        for iid in idle:
            if surplus <= 0:
                break
            instance = self.provider.instances[iid]
            if instance.state != RUNNING:
                continue
            boundary = self._next_billing_boundary(instance, t)
            if t <= boundary < t + tick:
                self.provider.terminate(iid, at=boundary)
                self.pool.discard(iid)
                actions.append(TerminateAction(t, iid, boundary))
                surplus -= 1
        return actions

    def _provision_one(self, t: float, d_down_gb: float, d_up_gb: float) -> ProvisionAction:
        quote = self.quote(t, d_down_gb, d_up_gb)
        spec = self.provider.catalog[self.instance_type]
        if self.market_kind == "spot":
            market = Market.spot(self.bid_policy.bid_for(spec.on_demand_price_per_hour))
        else:
            market = Market.on_demand()
        instance = self.provider.provision(self.instance_type, quote.zone, market)
        self.pool.add(instance.id)
        return ProvisionAction(t, instance.id, quote.zone, market.kind, market.bid_per_hour)

    @staticmethod
    def _next_billing_boundary(instance: Instance, t: float) -> float:
        elapsed = t - instance.ready_time
        hours = max(1, math.ceil(elapsed / HOUR - 1e-9))
        return instance.ready_time + hours * HOUR

    # --- views ---

    def alive_instances(self) -> list[Instance]:
        return [
            self.provider.instances[iid]
            for iid in sorted(self.pool)
            if not self.provider.instances[iid].ended
        ]

    def pool_size(self) -> int:
        return sum(1 for _ in self.alive_instances())

    def idle_reuse_check(self, busy_instance_ids: set[str], t: float) -> list[str]:
        """Idle running instances stay claimable until scale_pass releases
        them at a billing boundary; returns their ids for callers that want
        to verify reuse."""
        return [
            inst.id
            for inst in self.alive_instances()
            if inst.state == RUNNING and inst.id not in busy_instance_ids
        ]
