"""Deterministic event loop binding the provider, queue, storage, and
security modules into a running deployment.

Structure: a coarse control plane runs once per tick (market step, chaos,
monitor requeue, scaling), while fine-grained events (job arrivals, instance
readiness, stage/execution completion, status markers) are processed at
their exact times from a single heap. The shared clock advances through
every event, so timestamps in records and audit logs are exact, not
tick-quantized.
"""
from __future__ import annotations

import heapq
import random
import re
from dataclasses import dataclass, field
from typing import Optional

from . import defaults
from .cloudsim import CloudProvider, ConstantDelay, LognormalDelay, Market, RUNNING
from .errors import AccessDenied, NotFound
from .jobqueue import (
    ACTIVE,
    DbCapacity,
    JobDescription,
    JobQueue,
    StatusMarker,
    TaskDatabase,
)
from .provisioner import (
    BidPolicy,
    PlacementScope,
    Provisioner,
    ProvisionAction,
    ScalingStrategy,
    TerminateAction,
)
from .security import AccessController, TASK_EXECUTOR, Token
from .simclock import HOUR, Clock
from .storage import ObjectStore

_SLEEP_RE = re.compile(r"sleep\s+([0-9.]+)")
_EXIT_RE = re.compile(r"exit\s+(\d+)")


def parse_script(script: str) -> tuple[float, int]:
    """Synthetic executor: total sleep time and final exit code. Anything
    else in the command text runs instantly and succeeds."""
    duration = sum(float(m) for m in _SLEEP_RE.findall(script))
    exits = _EXIT_RE.findall(script)
    return duration, int(exits[-1]) if exits else 0


@dataclass
class SimConfig:
    tick: float = 60.0
    staging_bandwidth_mb_s: float = 100.0
    marker_interval_s: float = 30.0
    output_size_gb: float = 0.1
    horizon_s: float = 90 * 24 * HOUR


@dataclass(frozen=True)
class ChaosSpec:
    """Kill each running spot instance with this probability at every
    simulated hour boundary."""

    kill_probability_per_hour: float
    seed: int = 0


@dataclass
class Platform:
    """One assembled deployment: shared clock plus all subsystem registries."""

    clock: Clock
    access: AccessController
    store: ObjectStore
    db: TaskDatabase
    queue: JobQueue
    provider: CloudProvider

    @classmethod
    def build(
        cls,
        catalog=None,
        regions=None,
        tiers=None,
        db_capacity: Optional[DbCapacity] = None,
        seed: int = 0,
        start: float = 0.0,
        tick: float = 60.0,
        delay_model=None,
        url_secret: bytes = b"enclave-dev-secret",
    ) -> "Platform":
        clock = Clock(start=start, tick=tick)
        access = AccessController(clock)
        defaults.install_internal_roles(access)
        defaults.install_common_roles(access)
        store = ObjectStore(clock, access, tiers=tiers, url_secret=url_secret)
        store.create_bucket(defaults.DATASET_BUCKET)
        db = TaskDatabase(db_capacity or DbCapacity())
        queue = JobQueue(clock, access, store, db)
        provider = CloudProvider(
            catalog=dict(catalog or defaults.DEFAULT_CATALOG),
            regions=list(regions or defaults.DEFAULT_REGIONS),
            clock=clock,
            delay_model=delay_model or LognormalDelay(),
            seed=seed,
        )
        queue.instance_state = lambda iid: (
            provider.instances[iid].state if iid in provider.instances else None
        )
        access.set_active_job_checker(queue.has_active_job)
        return cls(clock, access, store, db, queue, provider)


@dataclass
class PoolSpec:
    queue_class: str
    provisioner: Provisioner
    strategy: ScalingStrategy
    pre_provisioned: bool = False  # fixed pools are brought up before work arrives


@dataclass
class Worker:
    instance_id: str
    queue_class: str
    token: Token
    epoch: int = 0
    job_id: Optional[str] = None
    run_finish_time: float = 0.0
    rng: random.Random = field(default_factory=random.Random)


class Simulation:
    """Drives one deployment, in batch mode (a scheduled workload run to
    completion) or service mode (step ticks on demand while clients submit
    through the gateway)."""

    def __init__(
        self,
        platform: Platform,
        pools: dict[str, PoolSpec],
        config: Optional[SimConfig] = None,
        chaos: Optional[ChaosSpec] = None,
        seed: int = 0,
    ):
        self.platform = platform
        self.pools = pools
        self.config = config or SimConfig()
        self.chaos = chaos
        self.seed = seed
        self.workers: dict[str, Worker] = {}
        self.timeline: list[dict] = []
        self._events: list[tuple[float, int, str, tuple]] = []
        self._event_seq = 0
        self._arrivals_outstanding = 0
        self._owner_tokens: dict[str, Token] = {}
        self._chaos_rng = random.Random(f"chaos:{chaos.seed}" if chaos else "chaos:off")
        self._next_boundary = platform.clock.now + self.config.tick
        self._start = platform.clock.now
        for spec in pools.values():
            if spec.pre_provisioned:
                self._pre_provision(spec)

    # --- setup ---

    def _pre_provision(self, spec: PoolSpec) -> None:
        """Bring a fixed pool up before the workload starts; these instances
        are ready (and billing) from the start of the run."""
        zero_delay = ConstantDelay(0.0)
        for _ in range(spec.strategy.target(0)):
            quote = spec.provisioner.quote(self.platform.clock.now)
            market = self._market_for(spec)
            instance = self.platform.provider.provision(
                spec.provisioner.instance_type, quote.zone, market, delay_model=zero_delay
            )
            spec.provisioner.pool.add(instance.id)
            self._add_worker(instance.id, spec.queue_class)

    def _market_for(self, spec: PoolSpec) -> Market:
        if spec.provisioner.market_kind == "spot":
            type_spec = self.platform.provider.catalog[spec.provisioner.instance_type]
            return Market.spot(spec.provisioner.bid_policy.bid_for(type_spec.on_demand_price_per_hour))
        return Market.on_demand()

    def submit_at(self, t: float, description: JobDescription) -> None:
        if t < self.platform.clock.now:
            raise ValueError("cannot schedule an arrival in the past")
        self._arrivals_outstanding += 1
        self._schedule(t, "arrival", (description,))

    # --- main loops ---

    def run(self, max_ticks: Optional[int] = None) -> None:
        """Batch mode: advance until every submitted job is terminal and no
        arrivals remain, or the horizon is hit."""
        ticks = 0
        while True:
            self._advance_one_tick()
            ticks += 1
            if self._workload_done():
                return
            if max_ticks is not None and ticks >= max_ticks:
                raise RuntimeError("workload incomplete after max_ticks")
            if self.platform.clock.now - self._start > self.config.horizon_s:
                raise RuntimeError("simulation horizon exceeded")

    def step(self, n_ticks: int = 1) -> None:
        """Service mode: advance a fixed number of ticks."""
        for _ in range(n_ticks):
            self._advance_one_tick()

    def _workload_done(self) -> bool:
        if self._arrivals_outstanding:
            return False
        records = self.platform.queue.records
        return all(r.terminal for r in records.values())

    def finalize(self) -> float:
        """Terminate every surviving instance (billing final partial hours)
        and return the time of the last job completion."""
        now = self.platform.clock.now
        for instance in self.platform.provider.alive():
            self.platform.provider.terminate(instance.id, at=now)
        ends = [r.end_time for r in self.platform.queue.records.values() if r.end_time]
        return max(ends) if ends else now

    # --- tick processing ---

    def _advance_one_tick(self) -> None:
        boundary = self._next_boundary
        clock = self.platform.clock
        while self._events and self._events[0][0] < boundary:
            t, _, kind, payload = heapq.heappop(self._events)
            clock.advance(t)
            self._handle(kind, t, payload)
        clock.advance(boundary)
        self._control_plane(boundary)
        self._next_boundary = boundary + self.config.tick

    def _control_plane(self, t: float) -> None:
        provider = self.platform.provider
        queue = self.platform.queue

        revocations = provider.step_markets(t)
        if self.chaos and (t - self._start) % HOUR < self.config.tick / 2:
            for instance in sorted(provider.running(), key=lambda i: i.id):
                if not instance.market.is_spot:
                    continue
                if self._chaos_rng.random() < self.chaos.kill_probability_per_hour:
                    revocations.append(provider.force_revoke(instance.id, t))
        for event in revocations:
            worker = self.workers.pop(event.instance_id, None)
            if worker is not None:
                worker.epoch += 1

        for requeue in queue.monitor_pass(t):
            worker = self.workers.get(requeue.instance_id)
            if worker is not None and worker.job_id == requeue.job_id:
                worker.epoch += 1
                worker.job_id = None

        self.platform.store.settle(t)

        for spec in self.pools.values():
            idle = [
                w.instance_id
                for w in self.workers.values()
                if w.queue_class == spec.queue_class and not w.job_id
            ]
            actions = spec.provisioner.scale_pass(
                spec.strategy,
                pending_count=queue.pending_count(spec.queue_class),
                active_count=queue.active_count(spec.queue_class),
                idle_instance_ids=idle,
                t=t,
                tick=self.config.tick,
            )
            for action in actions:
                if isinstance(action, ProvisionAction):
                    self._add_worker(action.instance_id, spec.queue_class)
                elif isinstance(action, TerminateAction):
                    self.workers.pop(action.instance_id, None)

        self._claim_sweep(t)
        self._record_timeline(t)

    def _add_worker(self, instance_id: str, queue_class: str) -> None:
        token = self.platform.access.issue_internal_token(TASK_EXECUTOR, instance_id)
        worker = Worker(
            instance_id=instance_id,
            queue_class=queue_class,
            token=token,
            rng=random.Random(f"{self.seed}:marker:{instance_id}"),
        )
        self.workers[instance_id] = worker
        instance = self.platform.provider.instances[instance_id]
        self._schedule(max(instance.ready_time, self.platform.clock.now), "ready", (instance_id,))

    def _claim_sweep(self, t: float) -> None:
        for spec in self.pools.values():
            while self.platform.queue.pending_count(spec.queue_class) > 0:
                idle = sorted(
                    w.instance_id
                    for w in self.workers.values()
                    if w.queue_class == spec.queue_class
                    and not w.job_id
                    and self._instance_running(w.instance_id)
                )
                if not idle or not self._try_claim(self.workers[idle[0]], t):
                    break

    def _instance_running(self, instance_id: str) -> bool:
        instance = self.platform.provider.instances.get(instance_id)
        return instance is not None and instance.state == RUNNING

    def _record_timeline(self, t: float) -> None:
        provisioned = 0
        idle = 0
        for spec in self.pools.values():
            for instance in spec.provisioner.alive_instances():
                provisioned += 1
                worker = self.workers.get(instance.id)
                if instance.state == RUNNING and (worker is None or not worker.job_id):
                    idle += 1
        queue = self.platform.queue
        self.timeline.append(
            {
                "t": t,
                "provisioned": provisioned,
                "idle": idle,
                "pending": sum(queue.pending_count(q) for q in self.pools),
                "active": queue.active_count(),
            }
        )

    # --- event handlers ---

    def _schedule(self, t: float, kind: str, payload: tuple) -> None:
        self._event_seq += 1
        heapq.heappush(self._events, (t, self._event_seq, kind, payload))

    def _handle(self, kind: str, t: float, payload: tuple) -> None:
        if kind == "arrival":
            self._handle_arrival(t, payload[0])
        elif kind == "ready":
            self._handle_ready(t, payload[0])
        elif kind == "finish":
            self._handle_finish(t, *payload)
        elif kind == "marker":
            self._handle_marker(t, *payload)

    def _handle_arrival(self, t: float, description: JobDescription) -> None:
        self._arrivals_outstanding -= 1
        token = self._owner_token(description.owner)
        self.platform.queue.submit(description, token)
        self._claim_sweep(t)

    def _owner_token(self, owner: str) -> Token:
        token = self._owner_tokens.get(owner)
        if token is None or self.platform.access.resolve(token.id) is None:
            token = self.platform.access.login(owner)
            self._owner_tokens[owner] = token
        return token

    def _handle_ready(self, t: float, instance_id: str) -> None:
        self.platform.provider.poll_ready(t)
        worker = self.workers.get(instance_id)
        if worker is not None and not worker.job_id:
            self._try_claim(worker, t)

    def _handle_finish(self, t: float, instance_id: str, epoch: int, job_id: str, timed_out: bool, exit_code: int) -> None:
        worker = self.workers.get(instance_id)
        if worker is None or worker.epoch != epoch or worker.job_id != job_id:
            return
        record = self.platform.queue.get(job_id)
        if record is None or record.state != ACTIVE or record.assigned_instance != instance_id:
            worker.job_id = None
            return
        outputs = [
            (pattern, self.config.output_size_gb) for pattern in record.description.outputs
        ]
        if timed_out:
            self.platform.queue.fail(instance_id, job_id, "TIMED_OUT")
        else:
            self.platform.queue.complete(instance_id, job_id, exit_code, outputs)
        worker.job_id = None
        self._try_claim(worker, t)

    def _handle_marker(self, t: float, instance_id: str, epoch: int, job_id: str) -> None:
        worker = self.workers.get(instance_id)
        if worker is None or worker.epoch != epoch or worker.job_id != job_id:
            return
        record = self.platform.queue.get(job_id)
        if record is None or record.state != ACTIVE:
            return
        start = record.stage_done_time or t
        total = max(worker.run_finish_time - start, 1e-9)
        progress = min(max((t - start) / total, 0.0), 1.0)
        marker = StatusMarker(
            job_id=job_id,
            time=t,
            cpu_util=round(0.5 + 0.45 * worker.rng.random(), 3),
            ram_util=round(0.3 + 0.4 * worker.rng.random(), 3),
            io_util=round(0.1 + 0.3 * worker.rng.random(), 3),
            progress=f"{progress:.0%}",
        )
        self.platform.queue.report_status(instance_id, marker)
        nxt = t + self.config.marker_interval_s
        if nxt < worker.run_finish_time:
            self._schedule(nxt, "marker", (instance_id, epoch, job_id))

    # --- the worker-side execution driver ---

    def _try_claim(self, worker: Worker, t: float) -> bool:
        """Claim one job and run the worker protocol: assume the owner's
        role, stage inputs, drop back to the task-executor role, execute the
        script within its wall-time bound, then record completion."""
        if not self._instance_running(worker.instance_id):
            return False
        record = self.platform.queue.claim(worker.instance_id, worker.queue_class)
        if record is None:
            return False
        worker.epoch += 1
        worker.job_id = record.id
        description = record.description

        stage_ready = t
        total_gb = 0.0
        if description.inputs:
            worker.token = self._ensure_worker_token(worker)
            assumed = self.platform.access.assume_role(worker.token, description.owner)
            failed = False
            for ref in description.inputs:
                try:
                    available_at, size_gb = self._stage_input(ref, assumed)
                except (AccessDenied, NotFound):
                    failed = True
                    break
                stage_ready = max(stage_ready, available_at)
                total_gb += size_gb
            self.platform.access.release_role(assumed)
            if failed:
                self.platform.queue.fail(worker.instance_id, record.id, "STAGE_FAILED")
                worker.job_id = None
                return True

        transfer_s = total_gb * 1000.0 / self.config.staging_bandwidth_mb_s
        stage_done = stage_ready + transfer_s
        self.platform.queue.mark_stage_done(worker.instance_id, record.id, stage_done)

        duration, exit_code = parse_script(description.script)
        timed_out = duration > description.max_wall_time_s
        run_s = min(duration, description.max_wall_time_s)
        finish_t = stage_done + run_s
        worker.run_finish_time = finish_t
        self._schedule(finish_t, "finish", (worker.instance_id, worker.epoch, record.id, timed_out, exit_code))
        first_marker = stage_done + self.config.marker_interval_s
        if first_marker < finish_t:
            self._schedule(first_marker, "marker", (worker.instance_id, worker.epoch, record.id))
        return True

    def _ensure_worker_token(self, worker: Worker) -> Token:
        if self.platform.access.resolve(worker.token.id) is None:
            worker.token = self.platform.access.issue_internal_token(
                TASK_EXECUTOR, worker.instance_id
            )
        return worker.token

    def _stage_input(self, ref: str, token: Token) -> tuple[float, float]:
        """Returns (available_at, size_gb) for one input reference."""
        if ref.startswith("kotta://"):
            obj = self.platform.store.fetch_by_url(ref)
            return self.platform.clock.now, obj.size_gb
        if "://" in ref:
            return self.platform.clock.now, 0.0  # external URL, no authz
        bucket, _, key = ref.partition("/")
        receipt = self.platform.store.stage(bucket, key, token)
        obj = self.platform.store.objects[(bucket, key)]
        return receipt.available_at, obj.size_gb


def build_pool(
    platform: Platform,
    queue_class: str,
    strategy: ScalingStrategy,
    instance_type: str = "m4.xlarge",
    market_kind: str = "spot",
    scope: Optional[PlacementScope] = None,
    bid_policy: Optional[BidPolicy] = None,
    data_region: str = defaults.HOME_REGION,
    pre_provisioned: Optional[bool] = None,
) -> PoolSpec:
    provisioner = Provisioner(
        provider=platform.provider,
        instance_type=instance_type,
        market_kind=market_kind,
        scope=scope or PlacementScope.cross_zone(defaults.HOME_REGION),
        bid_policy=bid_policy,
        data_region=data_region,
    )
    if pre_provisioned is None:
        pre_provisioned = strategy.kind == "no-scaling"
    return PoolSpec(queue_class, provisioner, strategy, pre_provisioned)
