"""Request/response models for the REST gateway."""
from __future__ import annotations

from typing import Any, Optional

from pydantic import BaseModel, Field


class ErrorBody(BaseModel):
    code: str
    message: str


class ErrorOut(BaseModel):
    error: ErrorBody


class LoginRequest(BaseModel):
    user_id: str


class TokenOut(BaseModel):
    token: str
    subject: str
    roles: list[str]
    expires_at: float


class PutObjectRequest(BaseModel):
    size_gb: float


class ObjectOut(BaseModel):
    bucket: str
    key: str
    size_gb: float
    tier: str
    owner: str
    created_at: float
    last_access: float
    encrypted_at_rest: bool


class ObjectListOut(BaseModel):
    objects: list[ObjectOut]
    next_cursor: Optional[str] = None


class BucketListOut(BaseModel):
    buckets: list[str]


class SignRequest(BaseModel):
    key: str
    ttl_seconds: float = 3600.0


class SignedUrlOut(BaseModel):
    url: str
    bucket: str
    key: str
    expires_at: float


class JobSubmitRequest(BaseModel):
    owner: str
    queue: str
    inputs: list[str] = Field(default_factory=list)
    script: str
    outputs: list[str] = Field(default_factory=list)
    max_walltime_secs: float


class MarkerOut(BaseModel):
    time: float
    cpu_util: float
    ram_util: float
    io_util: float
    progress: str


class JobOut(BaseModel):
    id: str
    owner: str
    queue: str
    state: str
    requeues: int
    submit_time: float
    claim_time: Optional[float] = None
    stage_done_time: Optional[float] = None
    end_time: Optional[float] = None
    assigned_instance: Optional[str] = None
    exit_code: Optional[int] = None
    failure: Optional[str] = None
    markers: list[MarkerOut] = Field(default_factory=list)


class JobListOut(BaseModel):
    jobs: list[JobOut]
    next_cursor: Optional[str] = None


class TemplateIn(BaseModel):
    name: str
    description: JobSubmitRequest
    defaults: dict[str, str] = Field(default_factory=dict)


class TemplateOut(BaseModel):
    name: str
    description: JobSubmitRequest
    defaults: dict[str, str]
    parameters: list[str]


class TemplateListOut(BaseModel):
    templates: list[TemplateOut]


class TemplateSubmitRequest(BaseModel):
    parameters: dict[str, str] = Field(default_factory=dict)


class InstanceOut(BaseModel):
    id: str
    type_name: str
    zone: str
    market: str
    state: str
    busy: bool


class PoolOut(BaseModel):
    queue_class: str
    strategy: str
    provisioned: int
    idle: int
    pending_jobs: int
    active_jobs: int
    instances: list[InstanceOut]


class PoolsOut(BaseModel):
    now: float
    pools: list[PoolOut]


class TimelinePoint(BaseModel):
    t: float
    provisioned: int
    idle: int
    pending: int
    active: int


class TimelineOut(BaseModel):
    points: list[TimelinePoint]


class CostsOut(BaseModel):
    now: float
    compute_spot_cost: float
    compute_on_demand_equivalent_cost: float
    storage_cost_to_date: float
    billed_instance_hours: int


class AuditRecordOut(BaseModel):
    seq: int
    time: float
    iso_time: str
    actor: str
    action: str
    resource: str
    outcome: str


class AuditOut(BaseModel):
    records: list[AuditRecordOut]


class TickRequest(BaseModel):
    ticks: int = 1


class TickOut(BaseModel):
    now: float
    iso_now: str
    pending_jobs: int
    active_jobs: int


class ExperimentOut(BaseModel):
    name: str
    data: dict[str, Any]
    summary_header: list[str]
    summary_rows: list[list[Any]]
