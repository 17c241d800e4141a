"""Experiment drivers: elastic scaling, task throughput, and cost-aware
placement, plus machine-readable report emission.

Every experiment is a pure function of its configuration; strategies inside
one experiment consume identical workload and trace inputs, so rows are
directly comparable.
"""
from __future__ import annotations

import heapq
import json
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Optional

from . import defaults
from .cloudsim import SpotPriceTrace
from .errors import ConfigError, IoError
from .jobqueue import DbCapacity, JobDescription, TaskDatabase
from .provisioner import BidPolicy, PlacementScope, ScalingStrategy
from .simclock import HOUR
from .simulation import ChaosSpec, Platform, SimConfig, Simulation, build_pool
from .workload import (
    TraceSynthesisParams,
    WorkloadSpec,
    export_descriptions,
    generate,
    synthesize_traces,
)

DATASET_OWNER = "curator"


@dataclass(frozen=True)
class JobOutcome:
    job_id: str
    wait_s: float
    stage_s: float
    exec_s: float
    requeues: int


@dataclass
class RunMetrics:
    strategy: str
    per_job: list[JobOutcome]
    makespan_s: float
    spot_cost: float
    on_demand_equivalent_cost: float
    savings_vs_baseline_pct: float
    peak_concurrency: int
    billed_instance_hours: int
    timeline: list[dict] = field(default_factory=list)

    def to_dict(self, with_timeline: bool = True) -> dict:
        d = {
            "strategy": self.strategy,
            "makespan_s": round(self.makespan_s, 3),
            "spot_cost": round(self.spot_cost, 4),
            "on_demand_equivalent_cost": round(self.on_demand_equivalent_cost, 4),
            "savings_vs_baseline_pct": round(self.savings_vs_baseline_pct, 2),
            "peak_concurrency": self.peak_concurrency,
            "billed_instance_hours": self.billed_instance_hours,
            "per_job": [
                {
                    "job_id": j.job_id,
                    "wait_s": round(j.wait_s, 3),
                    "stage_s": round(j.stage_s, 3),
                    "exec_s": round(j.exec_s, 3),
                    "requeues": j.requeues,
                }
                for j in self.per_job
            ],
        }
        if with_timeline:
            d["timeline"] = self.timeline
        return d


@dataclass
class ScalingResult:
    name = "scaling_results"
    rows: list[RunMetrics]
    baseline: str
    seed: int

    def row(self, strategy_label: str) -> RunMetrics:
        for row in self.rows:
            if row.strategy == strategy_label:
                return row
        raise KeyError(strategy_label)

    def to_dict(self) -> dict:
        return {
            "experiment": "scaling",
            "seed": self.seed,
            "baseline": self.baseline,
            "rows": [r.to_dict() for r in self.rows],
        }

    def summary_table(self) -> tuple[list[str], list[list]]:
        header = [
            "strategy",
            "makespan_s",
            "mean_wait_s",
            "spot_cost",
            "on_demand_equivalent_cost",
            "savings_vs_baseline_pct",
            "peak_concurrency",
            "billed_instance_hours",
        ]
        rows = []
        for r in self.rows:
            mean_wait = sum(j.wait_s for j in r.per_job) / max(len(r.per_job), 1)
            rows.append(
                [
                    r.strategy,
                    round(r.makespan_s, 1),
                    round(mean_wait, 1),
                    round(r.spot_cost, 4),
                    round(r.on_demand_equivalent_cost, 4),
                    round(r.savings_vs_baseline_pct, 2),
                    r.peak_concurrency,
                    r.billed_instance_hours,
                ]
            )
        return header, rows


def _default_trace_params(instance_type: str, on_demand_price: float) -> TraceSynthesisParams:
    return TraceSynthesisParams(
        zones=tuple(defaults.all_zone_ids()),
        instance_type=instance_type,
        base_price=round(0.2 * on_demand_price, 6),
        volatility=0.05,
        duration_hours=31 * 24,
    )


def run_scaling_experiment(
    strategies: list[ScalingStrategy],
    workload_spec: Optional[WorkloadSpec] = None,
    traces: Optional[list[SpotPriceTrace]] = None,
    seed: int = 0,
    instance_type: str = "m4.xlarge",
    owner: str = "researcher",
    sim_config: Optional[SimConfig] = None,
    chaos: Optional[ChaosSpec] = None,
    baseline: Optional[str] = None,
) -> ScalingResult:
    """Run every strategy against the identical seeded workload and traces,
    measuring makespan, waits, and cost against the fixed-pool baseline."""
    if not strategies:
        raise ConfigError("no strategies")
    workload_spec = workload_spec or WorkloadSpec(seed=seed)
    jobs = generate(workload_spec)
    sim_config = sim_config or SimConfig()
    if traces is None:
        od_price = defaults.DEFAULT_CATALOG[instance_type].on_demand_price_per_hour
        traces = synthesize_traces(seed, _default_trace_params(instance_type, od_price))

    rows = []
    for strategy in strategies:
        rows.append(
            _run_one_scaling(
                strategy, jobs, traces, seed, instance_type, owner, sim_config, chaos
            )
        )

    baseline_label = baseline or next(
        (r.strategy for r in rows if r.strategy.startswith("no-scaling")), rows[0].strategy
    )
    base = next((r for r in rows if r.strategy == baseline_label), None)
    if base is None:
        raise ConfigError(f"baseline {baseline_label!r} is not among the strategies")
    for row in rows:
        row.savings_vs_baseline_pct = (
            (base.on_demand_equivalent_cost - row.on_demand_equivalent_cost)
            / base.on_demand_equivalent_cost
            * 100.0
        )
    return ScalingResult(rows=rows, baseline=baseline_label, seed=seed)


def _run_one_scaling(
    strategy: ScalingStrategy,
    jobs,
    traces: list[SpotPriceTrace],
    seed: int,
    instance_type: str,
    owner: str,
    sim_config: SimConfig,
    chaos: Optional[ChaosSpec],
) -> RunMetrics:
    platform = Platform.build(seed=seed, tick=sim_config.tick)
    platform.provider.add_traces(traces)
    defaults.provision_user(platform.access, platform.store, owner)

    for job in jobs:
        platform.store.system_put(
            defaults.DATASET_BUCKET,
            f"in/{job.index:04d}",
            float(job.input_size_gb),
            DATASET_OWNER,
            "service:harness",
        )

    pool = build_pool(
        platform,
        queue_class="prod",
        strategy=strategy,
        instance_type=instance_type,
        market_kind="spot",
        scope=PlacementScope.cross_zone(defaults.HOME_REGION),
        bid_policy=BidPolicy.fraction_of_on_demand(1.0),
    )
    sim = Simulation(platform, {"prod": pool}, config=sim_config, chaos=chaos, seed=seed)
    payloads = export_descriptions(jobs, owner, "prod", defaults.DATASET_BUCKET)
    for job, payload in zip(jobs, payloads):
        sim.submit_at(job.arrival_time, JobDescription.from_json(payload))
    sim.run()
    sim.finalize()

    queue = platform.queue
    outcomes = []
    submits, ends = [], []
    for record in queue.records.values():
        submits.append(record.submit_time)
        ends.append(record.end_time)
        outcomes.append(
            JobOutcome(
                job_id=record.id,
                wait_s=(record.first_claim_time or record.submit_time) - record.submit_time,
                stage_s=(record.stage_done_time or 0.0) - (record.claim_time or 0.0),
                exec_s=(record.end_time or 0.0) - (record.stage_done_time or 0.0),
                requeues=record.requeues,
            )
        )
    spot_cost = 0.0
    od_cost = 0.0
    billed = 0
    for instance in platform.provider.instances.values():
        od_cost += platform.provider.accrued_cost(instance.id, "on-demand-equivalent")
        billed += instance.billed_hours(platform.clock.now)
        if instance.market.is_spot:
            spot_cost += platform.provider.accrued_cost(instance.id, "spot-trace")
        else:
            spot_cost += platform.provider.accrued_cost(instance.id, "on-demand-equivalent")
    return RunMetrics(
        strategy=strategy.label,
        per_job=sorted(outcomes, key=lambda o: o.job_id),
        makespan_s=max(ends) - min(submits),
        spot_cost=spot_cost,
        on_demand_equivalent_cost=od_cost,
        savings_vs_baseline_pct=0.0,
        peak_concurrency=max((s["active"] for s in sim.timeline), default=0),
        billed_instance_hours=billed,
        timeline=sim.timeline,
    )


# --- throughput ---


@dataclass(frozen=True)
class ThroughputPoint:
    workers: int
    total_tasks: int
    submission_time_s: float
    completion_time_s: float
    throughput_tps: float


@dataclass
class ThroughputResult:
    name = "throughput"
    points: list[ThroughputPoint]
    db_ceiling_tps: float  # steady-state bound: min over resources of capacity/ops-per-task
    finite_run_ceiling_tps: float  # what K second-windows can admit over K-1 seconds
    per_worker_rate: float
    db_capacity: DbCapacity

    def to_dict(self) -> dict:
        return {
            "experiment": "throughput",
            "per_worker_rate_tps": self.per_worker_rate,
            "db_reads_per_second": self.db_capacity.reads_per_second,
            "db_writes_per_second": self.db_capacity.writes_per_second,
            "db_ceiling_tps": round(self.db_ceiling_tps, 3),
            "finite_run_ceiling_tps": round(self.finite_run_ceiling_tps, 3),
            "points": [
                {
                    "workers": p.workers,
                    "total_tasks": p.total_tasks,
                    "submission_time_s": round(p.submission_time_s, 3),
                    "completion_time_s": round(p.completion_time_s, 3),
                    "throughput_tps": round(p.throughput_tps, 3),
                }
                for p in self.points
            ],
        }

    def summary_table(self) -> tuple[list[str], list[list]]:
        header = ["workers", "total_tasks", "submission_time_s", "completion_time_s", "throughput_tps"]
        return header, [
            [p.workers, p.total_tasks, round(p.submission_time_s, 3), round(p.completion_time_s, 3), round(p.throughput_tps, 3)]
            for p in self.points
        ]


# database touches per task during the execution phase: claim read,
# claim write, completion write
_READS_PER_TASK = 1
_WRITES_PER_TASK = 2


def run_throughput_experiment(
    worker_counts: Iterable[int] = (1, 2, 4, 8, 16, 32),
    task_count: int = 10_000,
    db_capacity: DbCapacity = DbCapacity(100, 400),
    per_worker_rate: float = 4.9,
) -> ThroughputResult:
    """Strong-scaling sweep with trivial tasks: instances are up before the
    run, tasks are pre-submitted, and the database budget is the only shared
    resource. Throughput saturates at min(workers x rate, database ceiling)."""
    if task_count < 1 or per_worker_rate <= 0:
        raise ConfigError("task_count and per_worker_rate must be positive")
    points = []
    service_s = 1.0 / per_worker_rate
    for n in worker_counts:
        if n < 1:
            raise ConfigError("worker counts must be >= 1")
        db = TaskDatabase(db_capacity)
        t = 0.0
        for _ in range(task_count):
            t = db.write_at(t)
        submission_time = t
        exec_start = math.floor(t) + 1.0
        ready = [(exec_start, wid) for wid in range(n)]
        heapq.heapify(ready)
        last = exec_start
        for _ in range(task_count):
            t_free, wid = heapq.heappop(ready)
            t1 = db.read_at(t_free)
            t2 = db.write_at(t1)
            t3 = db.write_at(t2 + service_s)
            last = max(last, t3)
            heapq.heappush(ready, (t3, wid))
        completion = last - exec_start
        points.append(
            ThroughputPoint(
                workers=n,
                total_tasks=task_count,
                submission_time_s=submission_time,
                completion_time_s=completion,
                throughput_tps=task_count / completion,
            )
        )
    ceiling = min(
        db_capacity.reads_per_second / _READS_PER_TASK,
        db_capacity.writes_per_second / _WRITES_PER_TASK,
    )
    # the per-second window budget lets K windows drain in K-1 seconds, so a
    # finite saturated run is held to this slightly looser bound
    windows = math.ceil(task_count / ceiling)
    finite_ceiling = ceiling * windows / max(windows - 1, 1)
    return ThroughputResult(
        points=points,
        db_ceiling_tps=ceiling,
        finite_run_ceiling_tps=finite_ceiling,
        per_worker_rate=per_worker_rate,
        db_capacity=db_capacity,
    )


# --- cost-aware placement ---


@dataclass
class CostAwareResult:
    name = "cost_aware"
    rows: list[dict]
    home_region: str
    instance_type: str
    transfer_cost_per_gb: float
    hours: int

    def to_dict(self) -> dict:
        return {
            "experiment": "cost_aware",
            "home_region": self.home_region,
            "instance_type": self.instance_type,
            "transfer_cost_per_gb": self.transfer_cost_per_gb,
            "hours": self.hours,
            "rows": self.rows,
        }

    def summary_table(self) -> tuple[list[str], list[list]]:
        header = [
            "volume_gb",
            "single_az_cheapest",
            "single_az_most_expensive",
            "cross_az",
            "cross_region",
            "savings_cross_az_pct",
            "savings_cross_region_pct",
        ]
        return header, [[row[h] for h in header] for row in self.rows]


def run_cost_aware_experiment(
    traces: list[SpotPriceTrace],
    instance_type: str,
    data_volumes_gb: Iterable[float] = (0, 10, 50, 100, 500),
    transfer_cost_per_gb: float = 0.020,
    home_region: str = defaults.HOME_REGION,
    regions=None,
    duration_hours: Optional[int] = None,
) -> CostAwareResult:
    """Monthly cost of one recurring single-hour task under four placement
    strategies, across data volumes. Remote regions pay the transfer cost
    both ways every hour, so their advantage shrinks as volumes grow."""
    regions = regions or defaults.DEFAULT_REGIONS
    zone_region = {z: r.id for r in regions for z in r.zones}
    zone_traces = {t.zone: t for t in traces if t.instance_type == instance_type}
    if not zone_traces:
        raise ConfigError(f"no traces for instance type {instance_type}")
    home_zones = sorted(z for z in zone_traces if zone_region.get(z) == home_region)
    if not home_zones:
        raise ConfigError(f"no traces in home region {home_region}")

    start = max(t.start for t in zone_traces.values())
    end = min(t.samples[-1][0] for t in zone_traces.values())
    hours = int((end - start) // HOUR) + 1
    if duration_hours is not None:
        hours = min(hours, duration_hours)
    if hours < 1:
        raise ConfigError("traces do not overlap")

    prices = {
        z: [trace.price_at(start + h * HOUR) for h in range(hours)]
        for z, trace in sorted(zone_traces.items())
    }
    per_zone_total = {z: sum(series) for z, series in prices.items()}
    single_cheapest = min(per_zone_total[z] for z in home_zones)
    single_expensive = max(per_zone_total[z] for z in home_zones)
    cross_az = sum(min(prices[z][h] for z in home_zones) for h in range(hours))

    rows = []
    for volume in data_volumes_gb:
        if volume < 0:
            raise ConfigError("volumes must be >= 0")
        penalty = 2.0 * volume * transfer_cost_per_gb  # D_dn == D_up == volume
        cross_region = 0.0
        for h in range(hours):
            best = math.inf
            for z in sorted(prices):
                total = prices[z][h] + (0.0 if zone_region.get(z) == home_region else penalty)
                if total < best:
                    best = total
            cross_region += best
        rows.append(
            {
                "volume_gb": volume,
                "single_az_cheapest": round(single_cheapest, 4),
                "single_az_most_expensive": round(single_expensive, 4),
                "cross_az": round(cross_az, 4),
                "cross_region": round(cross_region, 4),
                "savings_cross_az_pct": round((single_cheapest - cross_az) / single_cheapest * 100.0, 4),
                "savings_cross_region_pct": round(
                    (single_cheapest - cross_region) / single_cheapest * 100.0, 4
                ),
            }
        )
    return CostAwareResult(
        rows=rows,
        home_region=home_region,
        instance_type=instance_type,
        transfer_cost_per_gb=transfer_cost_per_gb,
        hours=hours,
    )


# --- reports ---

FORMATS = ("json", "csv")


def emit_report(result, out_dir: str, formats: Iterable[str] = FORMATS) -> list[str]:
    """Serialize an experiment result to ``<name>.json`` / ``<name>.csv``
    with deterministic field order."""
    paths = []
    try:
        os.makedirs(out_dir, exist_ok=True)
        for fmt in formats:
            if fmt not in FORMATS:
                raise ConfigError(f"unknown report format {fmt!r}")
            path = os.path.join(out_dir, f"{result.name}.{fmt}")
            if fmt == "json":
                with open(path, "w", encoding="utf-8") as fh:
                    json.dump(result.to_dict(), fh, indent=2)
                    fh.write("\n")
            else:
                header, rows = result.summary_table()
                with open(path, "w", encoding="utf-8", newline="") as fh:
                    fh.write(",".join(str(h) for h in header) + "\n")
                    for row in rows:
                        fh.write(",".join(str(v) for v in row) + "\n")
            paths.append(path)
    except OSError as exc:
        raise IoError(str(exc)) from exc
    return paths


# --- config-driven entry point (CLI `experiment run`, REST /experiments) ---


def parse_strategy(entry: dict) -> ScalingStrategy:
    kind = entry.get("kind")
    try:
        if kind == "no-scaling":
            return ScalingStrategy.no_scaling(int(entry["fixed"]))
        if kind == "limited":
            return ScalingStrategy.limited(int(entry["max"]), int(entry.get("min", 0)))
        if kind == "unlimited":
            return ScalingStrategy.unlimited(int(entry.get("min", 0)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad strategy entry {entry}: {exc}") from exc
    raise ConfigError(f"unknown strategy kind {kind!r}")


def parse_workload_spec(section: dict) -> WorkloadSpec:
    spec = WorkloadSpec(
        job_count=int(section.get("job_count", 40)),
        window_hours=float(section.get("window_hours", 4.0)),
        inter_arrival_mean_hours=float(section.get("inter_arrival_mean_hours", 0.1)),
        mix=tuple(
            (float(d), float(f)) for d, f in section.get("mix", [[1, 0.4], [3, 0.2], [4, 0.4]])
        ),
        jitter_fraction=float(section.get("jitter_fraction", 0.05)),
        data_sizes_gb=tuple(int(s) for s in section.get("data_sizes_gb", (1, 3, 5, 7, 9))),
        seed=int(section.get("seed", 0)),
    )
    spec.validate()
    return spec


def _traces_from_config(cfg: dict, seed: int, instance_type: str) -> list[SpotPriceTrace]:
    from .cloudsim import load_traces

    section = cfg.get("traces", {})
    if "path" in section:
        return load_traces(section["path"])
    od_price = defaults.DEFAULT_CATALOG[instance_type].on_demand_price_per_hour
    base = _default_trace_params(instance_type, od_price)
    params = TraceSynthesisParams(
        zones=tuple(section.get("zones", base.zones)),
        instance_type=instance_type,
        base_price=float(section.get("base_price", base.base_price)),
        volatility=float(section.get("volatility", base.volatility)),
        duration_hours=int(section.get("duration_hours", base.duration_hours)),
        spike_probability=float(section.get("spike_probability", 0.0)),
        spike_price=float(section.get("spike_price", od_price)),
    )
    return synthesize_traces(int(section.get("seed", seed)), params)


def run_from_config(cfg: dict):
    """Dispatch one experiment described by a parsed config file."""
    kind = cfg.get("kind")
    seed = int(cfg.get("seed", 0))
    if kind == "scaling":
        instance_type = cfg.get("instance_type", "m4.xlarge")
        strategies = [parse_strategy(e) for e in cfg.get("strategies", [])]
        return run_scaling_experiment(
            strategies=strategies,
            workload_spec=parse_workload_spec(cfg.get("workload", {})),
            traces=_traces_from_config(cfg, seed, instance_type),
            seed=seed,
            instance_type=instance_type,
            baseline=cfg.get("baseline"),
        )
    if kind == "throughput":
        db = cfg.get("db", {})
        return run_throughput_experiment(
            worker_counts=tuple(int(n) for n in cfg.get("worker_counts", (1, 2, 4, 8, 16, 32))),
            task_count=int(cfg.get("task_count", 10_000)),
            db_capacity=DbCapacity(
                int(db.get("reads_per_second", 100)), int(db.get("writes_per_second", 400))
            ),
            per_worker_rate=float(cfg.get("per_worker_rate", 4.9)),
        )
    if kind == "cost_aware":
        instance_type = cfg.get("instance_type", "c4.8xlarge")
        return run_cost_aware_experiment(
            traces=_traces_from_config(cfg, seed, instance_type),
            instance_type=instance_type,
            data_volumes_gb=tuple(float(v) for v in cfg.get("data_volumes_gb", (0, 10, 50, 100, 500))),
            transfer_cost_per_gb=float(cfg.get("transfer_cost_per_gb", 0.020)),
            home_region=cfg.get("home_region", defaults.HOME_REGION),
            duration_hours=int(cfg["duration_hours"]) if "duration_hours" in cfg else None,
        )
    raise ConfigError(f"unknown experiment kind {kind!r}")
