"""Queue-based job management.

Jobs move pending -> active -> completed/failed, with active -> pending
requeues when the instance underneath disappears. Claims are atomic and FIFO
by submission; requeued jobs re-enter at the tail. Every database touch is
metered by a capacity-limited task database (token bucket per second), which
is what ultimately caps task throughput.
"""
from __future__ import annotations

import heapq
import json
import math
import threading
from dataclasses import dataclass
from typing import Callable, Optional

from .errors import (
    InvalidDescription,
    InvalidParams,
    AccessDenied,
    NotActive,
    NotAssigned,
    UnknownWorker,
)
from .security import AccessController, Token
from .simclock import Clock
from .storage import ObjectStore

DEV = "dev"
PROD = "prod"
QUEUE_CLASSES = (DEV, PROD)

PENDING = "pending"
ACTIVE = "active"
COMPLETED = "completed"
FAILED = "failed"

JOB_RESOURCE_PREFIX = "jobs"  # submission requires write on jobs/<queue>


@dataclass(frozen=True)
class JobDescription:
    owner: str
    queue_class: str
    inputs: tuple[str, ...]  # "bucket/key" references or external URLs
    script: str
    outputs: tuple[str, ...]
    max_wall_time_s: float

    def validate(self) -> None:
        if self.queue_class not in QUEUE_CLASSES:
            raise InvalidDescription(f"queue must be one of {QUEUE_CLASSES}")
        if self.max_wall_time_s <= 0:
            raise InvalidDescription("max_walltime_secs must be positive")
        if not self.owner:
            raise InvalidDescription("owner is required")
        if not self.script:
            raise InvalidDescription("script is required")
        for ref in self.inputs:
            if "://" not in ref and "/" not in ref:
                raise InvalidDescription(f"input {ref!r} is neither bucket/key nor URL")

    @classmethod
    def from_json(cls, payload: dict | str) -> "JobDescription":
        if isinstance(payload, str):
            try:
                payload = json.loads(payload)
            except json.JSONDecodeError as exc:
                raise InvalidDescription(f"bad JSON: {exc}") from exc
        try:
            desc = cls(
                owner=payload["owner"],
                queue_class=payload["queue"],
                inputs=tuple(payload.get("inputs", ())),
                script=payload["script"],
                outputs=tuple(payload.get("outputs", ())),
                max_wall_time_s=float(payload["max_walltime_secs"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidDescription(str(exc)) from exc
        desc.validate()
        return desc

    def to_json(self) -> dict:
        return {
            "owner": self.owner,
            "queue": self.queue_class,
            "inputs": list(self.inputs),
            "script": self.script,
            "outputs": list(self.outputs),
            "max_walltime_secs": self.max_wall_time_s,
        }


@dataclass
class JobRecord:
    id: str
    description: JobDescription
    state: str = PENDING
    requeues: int = 0
    submit_time: float = 0.0
    claim_time: Optional[float] = None
    first_claim_time: Optional[float] = None
    stage_done_time: Optional[float] = None
    end_time: Optional[float] = None
    assigned_instance: Optional[str] = None
    exit_code: Optional[int] = None
    failure: Optional[str] = None
    role_ref: str = ""

    @property
    def terminal(self) -> bool:
        return self.state in (COMPLETED, FAILED)


@dataclass(frozen=True)
class StatusMarker:
    job_id: str
    time: float
    cpu_util: float
    ram_util: float
    io_util: float
    progress: str

    def __post_init__(self):
        for name in ("cpu_util", "ram_util", "io_util"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidParams(f"{name}={v} outside [0, 1]")


@dataclass(frozen=True)
class RequeueEvent:
    time: float
    job_id: str
    instance_id: str
    reason: str


@dataclass(frozen=True)
class DbCapacity:
    reads_per_second: int = 100
    writes_per_second: int = 400

    def __post_init__(self):
        if self.reads_per_second <= 0 or self.writes_per_second <= 0:
            raise InvalidParams("capacities must be positive")


class TaskDatabase:
    """Capacity-metered key-value store stand-in.

    Operations within the current second's budget complete at their request
    time. Operations beyond it spill into the next second with capacity and
    are paced across that second, so a saturated store drains at exactly the
    provisioned rate. The returned value is the operation's effective
    completion time."""

    def __init__(self, capacity: DbCapacity = DbCapacity()):
        self.capacity = capacity
        self._read_counts: dict[int, int] = {}
        self._write_counts: dict[int, int] = {}
        self.reads = 0
        self.writes = 0

    def read_at(self, t: float) -> float:
        self.reads += 1
        return self._admit(self._read_counts, self.capacity.reads_per_second, t)

    def write_at(self, t: float) -> float:
        self.writes += 1
        return self._admit(self._write_counts, self.capacity.writes_per_second, t)

    @staticmethod
    def _admit(counts: dict[int, int], cap: int, t: float) -> float:
        second = math.floor(t)
        while counts.get(second, 0) >= cap:
            second += 1
        slot = counts.get(second, 0)
        counts[second] = slot + 1
        if second == math.floor(t):
            return t
        return second + slot / cap


class JobQueue:
    """Pending/active queues plus the per-job state machine."""

    def __init__(
        self,
        clock: Clock,
        access: AccessController,
        store: ObjectStore,
        db: Optional[TaskDatabase] = None,
        output_bucket_pattern: str = "user-{owner}",
    ):
        self.clock = clock
        self.access = access
        self.store = store
        self.db = db or TaskDatabase()
        self.output_bucket_pattern = output_bucket_pattern
        self.records: dict[str, JobRecord] = {}
        self.markers: dict[str, list[StatusMarker]] = {}
        self.event_log: list[tuple[float, str, str, str]] = []  # (time, kind, job, instance)
        self._pending: dict[str, list[tuple[float, int, str]]] = {q: [] for q in QUEUE_CLASSES}
        self._seq = 0
        self._enqueue_seq = 0
        self._lock = threading.RLock()
        # wired to the cloud provider by the platform: instance id -> state
        self.instance_state: Callable[[str], Optional[str]] = lambda _id: None

    # --- submission ---

    def submit(self, description: JobDescription, token: Token) -> JobRecord:
        description.validate()
        resource = f"{JOB_RESOURCE_PREFIX}/{description.queue_class}"
        if not self.access.check_access(token, "write", resource):
            raise AccessDenied(resource)
        with self._lock:
            self._seq += 1
            job_id = f"j-{self._seq:06d}"
            effective = self.db.write_at(self.clock.now)
            record = JobRecord(
                id=job_id,
                description=description,
                submit_time=effective,
                role_ref=f"user:{description.owner}",
            )
            self.records[job_id] = record
            self.markers[job_id] = []
            self._enqueue(record, effective)
            self.event_log.append((effective, "submit", job_id, ""))
        return record

    def _enqueue(self, record: JobRecord, at: float) -> None:
        self._enqueue_seq += 1
        heapq.heappush(self._pending[record.description.queue_class], (at, self._enqueue_seq, record.id))

    # --- worker protocol ---

    def claim(self, worker_id: str, queue_class: str) -> Optional[JobRecord]:
        """Atomically move the oldest pending job to active for this worker.
        Returns None when the queue is empty."""
        state = self.instance_state(worker_id)
        if state is None:
            raise UnknownWorker(worker_id)
        if state != "running":
            return None
        with self._lock:
            t = self.db.read_at(self.clock.now)
            if not self._pending[queue_class]:
                return None
            _, _, job_id = heapq.heappop(self._pending[queue_class])
            record = self.records[job_id]
            effective = self.db.write_at(t)
            record.state = ACTIVE
            record.claim_time = effective
            if record.first_claim_time is None:
                record.first_claim_time = effective
            record.assigned_instance = worker_id
            self.event_log.append((effective, "claim", job_id, worker_id))
            return record

    def mark_stage_done(self, worker_id: str, job_id: str, at: float) -> None:
        with self._lock:
            record = self._active_for(worker_id, job_id)
            record.stage_done_time = at
            self.event_log.append((at, "stage-done", job_id, worker_id))

    def report_status(self, worker_id: str, marker: StatusMarker) -> None:
        with self._lock:
            self._active_for(worker_id, marker.job_id)
            self.db.write_at(self.clock.now)
            self.markers[marker.job_id].append(marker)

    def complete(
        self,
        worker_id: str,
        job_id: str,
        exit_code: int,
        produced_outputs: list[tuple[str, float]] = (),
    ) -> JobRecord:
        """Stage outputs back as the owner's private objects and finish the
        job: completed on exit 0, failed otherwise (outputs kept either way)."""
        with self._lock:
            record = self._active_for(worker_id, job_id)
            owner = record.description.owner
            bucket = self.output_bucket_pattern.format(owner=owner)
            self.store.create_bucket(bucket)
            actor = f"service:task-executor:{worker_id}"
            for key, size_gb in produced_outputs:
                self.store.system_put(bucket, f"jobs/{job_id}/{key}", size_gb, owner, actor)
            effective = self.db.write_at(self.clock.now)
            record.exit_code = exit_code
            record.state = COMPLETED if exit_code == 0 else FAILED
            record.end_time = effective
            record.assigned_instance = worker_id
            self.event_log.append((effective, record.state, job_id, worker_id))
            return record

    def fail(self, worker_id: str, job_id: str, failure: str) -> JobRecord:
        """Terminal failure without an exit code (staging failure, timeout)."""
        with self._lock:
            record = self._active_for(worker_id, job_id)
            effective = self.db.write_at(self.clock.now)
            record.failure = failure
            record.state = FAILED
            record.end_time = effective
            self.event_log.append((effective, FAILED, job_id, worker_id))
            return record

    # --- monitoring ---

    def monitor_pass(self, t: float) -> list[RequeueEvent]:
        """Requeue active jobs whose instance is gone, plus a stuck-worker
        guard for jobs active far beyond their wall-time budget."""
        events = []
        with self._lock:
            for record in self.records.values():
                if record.state != ACTIVE:
                    continue
                instance_state = self.instance_state(record.assigned_instance or "")
                reason = None
                if instance_state in (None, "revoked", "terminated"):
                    reason = f"instance-{instance_state or 'missing'}"
                elif (
                    record.claim_time is not None
                    and t - record.claim_time > 2 * record.description.max_wall_time_s
                ):
                    reason = "stuck-worker"
                if reason is None:
                    continue
                instance_id = record.assigned_instance or ""
                record.state = PENDING
                record.requeues += 1
                record.claim_time = None
                record.stage_done_time = None
                record.assigned_instance = None
                self.db.write_at(t)
                self._enqueue(record, t)
                events.append(RequeueEvent(t, record.id, instance_id, reason))
                self.event_log.append((t, "requeue", record.id, instance_id))
        return events

    # --- views and bindings ---

    def has_active_job(self, instance_id: str, user_id: str) -> bool:
        """Binding used by role assumption: does this worker currently hold
        an active job owned by this user?"""
        with self._lock:
            return any(
                r.state == ACTIVE
                and r.assigned_instance == instance_id
                and r.description.owner == user_id
                for r in self.records.values()
            )

    def pending_count(self, queue_class: str) -> int:
        return len(self._pending[queue_class])

    def active_count(self, queue_class: Optional[str] = None) -> int:
        return sum(
            1
            for r in self.records.values()
            if r.state == ACTIVE
            and (queue_class is None or r.description.queue_class == queue_class)
        )

    def census(self) -> dict[str, int]:
        counts = {PENDING: 0, ACTIVE: 0, COMPLETED: 0, FAILED: 0}
        for record in self.records.values():
            counts[record.state] += 1
        counts["total"] = len(self.records)
        return counts

    def get(self, job_id: str) -> Optional[JobRecord]:
        return self.records.get(job_id)

    def _active_for(self, worker_id: str, job_id: str) -> JobRecord:
        record = self.records.get(job_id)
        if record is None:
            raise NotAssigned(job_id)
        if record.assigned_instance != worker_id:
            raise NotAssigned(f"{job_id} not assigned to {worker_id}")
        if record.state != ACTIVE:
            raise NotActive(f"{job_id} is {record.state}")
        return record
