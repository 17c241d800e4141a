"""REST gateway: the front door for users, the CLI, and the dashboard.

Every data operation runs under the caller's bearer token and is authorized
by the security module; the gateway itself holds only the web-server role
and never touches user data on its own authority.
"""
from __future__ import annotations

import os
import re
import string
import uuid
from dataclasses import dataclass, field
from typing import Any, Optional

from fastapi import Depends, FastAPI, Query, Request
from fastapi.responses import JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles

from .. import defaults
from ..errors import (
    AccessDenied,
    ConfigError,
    EnclaveError,
    InvalidToken,
    NotFound,
)
from ..evalharness import run_from_config
from ..jobqueue import JobDescription, JobRecord
from ..provisioner import ScalingStrategy
from ..security import Token
from ..simclock import iso8601
from ..simulation import Platform, Simulation, build_pool
from ..workload import TraceSynthesisParams, synthesize_traces
from . import schemas

API_PREFIX = "/v1"
PAGE_SIZE = 100

_PLACEHOLDER_RE = re.compile(r"\$\{([A-Za-z0-9_]+)\}")


@dataclass
class Template:
    name: str
    description: dict
    defaults: dict[str, str] = field(default_factory=dict)

    def parameters(self) -> list[str]:
        found = set()
        for value in self._strings():
            found.update(_PLACEHOLDER_RE.findall(value))
        return sorted(found)

    def _strings(self):
        yield from (
            v for v in self.description.values() if isinstance(v, str)
        )
        for v in self.description.values():
            if isinstance(v, list):
                yield from (item for item in v if isinstance(item, str))

    def instantiate(self, parameters: dict[str, str]) -> dict:
        def sub(value):
            if isinstance(value, str):
                return string.Template(value).substitute(parameters)
            if isinstance(value, list):
                return [sub(v) for v in value]
            return value

        return {k: sub(v) for k, v in self.description.items()}


@dataclass
class ServiceState:
    """Everything one gateway process owns: the platform, its simulation
    coordinator, and server-stored job templates."""

    platform: Platform
    simulation: Simulation
    templates: dict[str, Template] = field(default_factory=dict)
    last_experiment: Optional[dict] = None


def demo_state(seed: int = 0) -> ServiceState:
    """A ready-to-serve deployment with demo users, data, and both pools."""
    platform = Platform.build(seed=seed)
    od = defaults.DEFAULT_CATALOG["m4.xlarge"].on_demand_price_per_hour
    traces = synthesize_traces(
        seed,
        TraceSynthesisParams(
            zones=tuple(defaults.all_zone_ids()),
            instance_type="m4.xlarge",
            base_price=round(0.2 * od, 6),
            volatility=0.05,
            duration_hours=31 * 24,
        ),
    )
    platform.provider.add_traces(traces)
    for user in ("alice", "bob"):
        defaults.provision_user(platform.access, platform.store, user)
    defaults.provision_user(platform.access, platform.store, "ops")
    platform.access.grant_role("ops", defaults.ADMIN_ROLE)
    for i, size in enumerate((2.0, 5.0, 9.0)):
        platform.store.system_put(
            defaults.DATASET_BUCKET, f"sample/part-{i}", size, "curator", "service:seed"
        )
    pools = {
        "dev": build_pool(
            platform,
            "dev",
            ScalingStrategy.no_scaling(1),
            market_kind="on-demand",
            pre_provisioned=True,
        ),
        "prod": build_pool(platform, "prod", ScalingStrategy.unlimited()),
    }
    simulation = Simulation(platform, pools, seed=seed)
    state = ServiceState(platform=platform, simulation=simulation)
    state.templates["sleep-demo"] = Template(
        name="sleep-demo",
        description={
            "owner": "${user}",
            "queue": "dev",
            "inputs": [],
            "script": "sleep ${seconds}",
            "outputs": ["result.txt"],
            "max_walltime_secs": 7200.0,
        },
        defaults={"seconds": "60"},
    )
    return state


def create_app(state: Optional[ServiceState] = None, frontend_dir: Optional[str] = None) -> FastAPI:
    state = state or demo_state()
    if frontend_dir is None:
        candidate = os.environ.get("ENCLAVE_FRONTEND_DIR", "frontend/dist")
        frontend_dir = candidate if os.path.isdir(candidate) else None
    app = FastAPI(title="enclave gateway", version="0.1.0")
    app.state.enclave = state
    platform = state.platform
    access = platform.access

    @app.middleware("http")
    async def request_id_middleware(request: Request, call_next):
        response = await call_next(request)
        response.headers["X-Request-Id"] = uuid.uuid4().hex
        return response

    @app.exception_handler(EnclaveError)
    async def enclave_error_handler(request: Request, exc: EnclaveError):
        return JSONResponse(
            status_code=exc.http_status,
            content={"error": {"code": exc.code, "message": str(exc)}},
        )

    def bearer(request: Request) -> Token:
        header = request.headers.get("authorization", "")
        if not header.lower().startswith("bearer "):
            raise InvalidToken("missing bearer token")
        token = access.resolve(header[7:].strip())
        if token is None:
            raise InvalidToken("unknown, expired, or revoked token")
        return token

    def require_admin(token: Token) -> None:
        if not access.is_admin(token):
            raise AccessDenied("admin role required")

    def page(items: list, cursor: Optional[str], limit: int):
        offset = int(cursor) if cursor else 0
        chunk = items[offset : offset + limit]
        next_cursor = str(offset + limit) if offset + limit < len(items) else None
        return chunk, next_cursor

    # --- auth ---

    @app.post(f"{API_PREFIX}/auth/login", response_model=schemas.TokenOut)
    def login(body: schemas.LoginRequest):
        token = access.login(body.user_id)
        return schemas.TokenOut(
            token=token.id, subject=token.subject, roles=list(token.roles), expires_at=token.expiry
        )

    # --- data ---

    @app.get(f"{API_PREFIX}/buckets", response_model=schemas.BucketListOut)
    def list_buckets(token: Token = Depends(bearer)):
        visible = [
            name
            for name in sorted(platform.store.buckets)
            if access.check_access(token, "list", name)
        ]
        return schemas.BucketListOut(buckets=visible)

    def object_out(obj) -> schemas.ObjectOut:
        return schemas.ObjectOut(**obj.view())

    @app.get(f"{API_PREFIX}/objects/{{bucket}}", response_model=schemas.ObjectListOut)
    def list_objects(
        bucket: str,
        prefix: str = "",
        cursor: Optional[str] = None,
        limit: int = Query(default=PAGE_SIZE, le=PAGE_SIZE),
        token: Token = Depends(bearer),
    ):
        objects = platform.store.list_objects(bucket, prefix, token)
        chunk, next_cursor = page(objects, cursor, limit)
        return schemas.ObjectListOut(
            objects=[object_out(o) for o in chunk], next_cursor=next_cursor
        )

    @app.post(
        f"{API_PREFIX}/objects/{{bucket}}/{{key:path}}",
        response_model=schemas.ObjectOut,
        status_code=201,
    )
    def put_object(bucket: str, key: str, body: schemas.PutObjectRequest, token: Token = Depends(bearer)):
        obj = platform.store.put(bucket, key, body.size_gb, owner=token.subject, token=token)
        return object_out(obj)

    @app.get(f"{API_PREFIX}/objects/{{bucket}}/{{key:path}}", response_model=schemas.ObjectOut)
    def get_object(bucket: str, key: str, token: Token = Depends(bearer)):
        return object_out(platform.store.describe(bucket, key, token))

    @app.post(f"{API_PREFIX}/sign/{{bucket}}", response_model=schemas.SignedUrlOut)
    def sign_object(bucket: str, body: schemas.SignRequest, token: Token = Depends(bearer)):
        url = platform.store.sign_url(bucket, body.key, body.ttl_seconds, token)
        return schemas.SignedUrlOut(
            url=url.render(), bucket=url.bucket, key=url.key, expires_at=url.expiry
        )

    @app.get(f"{API_PREFIX}/fetch", response_model=schemas.ObjectOut)
    def fetch_by_url(url: str):
        return object_out(platform.store.fetch_by_url(url))

    # --- jobs ---

    def job_out(record: JobRecord, with_markers: bool = False) -> schemas.JobOut:
        markers = []
        if with_markers:
            markers = [
                schemas.MarkerOut(
                    time=m.time,
                    cpu_util=m.cpu_util,
                    ram_util=m.ram_util,
                    io_util=m.io_util,
                    progress=m.progress,
                )
                for m in platform.queue.markers.get(record.id, [])
            ]
        return schemas.JobOut(
            id=record.id,
            owner=record.description.owner,
            queue=record.description.queue_class,
            state=record.state,
            requeues=record.requeues,
            submit_time=record.submit_time,
            claim_time=record.claim_time,
            stage_done_time=record.stage_done_time,
            end_time=record.end_time,
            assigned_instance=record.assigned_instance,
            exit_code=record.exit_code,
            failure=record.failure,
            markers=markers,
        )

    def submit_description(payload: dict, token: Token) -> JobRecord:
        description = JobDescription.from_json(payload)
        if description.owner != token.subject and not access.is_admin(token):
            raise AccessDenied("owner must match the authenticated user")
        return platform.queue.submit(description, token)

    @app.post(f"{API_PREFIX}/jobs", response_model=schemas.JobOut, status_code=201)
    def submit_job(body: schemas.JobSubmitRequest, token: Token = Depends(bearer)):
        return job_out(submit_description(body.model_dump(), token))

    @app.get(f"{API_PREFIX}/jobs", response_model=schemas.JobListOut)
    def list_jobs(
        state_filter: Optional[str] = Query(default=None, alias="state"),
        cursor: Optional[str] = None,
        limit: int = Query(default=PAGE_SIZE, le=PAGE_SIZE),
        token: Token = Depends(bearer),
    ):
        admin = access.is_admin(token)
        records = [
            r
            for r in sorted(platform.queue.records.values(), key=lambda r: r.id)
            if (admin or r.description.owner == token.subject)
            and (state_filter is None or r.state == state_filter)
        ]
        chunk, next_cursor = page(records, cursor, limit)
        return schemas.JobListOut(jobs=[job_out(r) for r in chunk], next_cursor=next_cursor)

    @app.get(f"{API_PREFIX}/jobs/{{job_id}}", response_model=schemas.JobOut)
    def get_job(job_id: str, token: Token = Depends(bearer)):
        record = platform.queue.get(job_id)
        if record is None:
            raise NotFound(job_id)
        if record.description.owner != token.subject and not access.is_admin(token):
            raise AccessDenied("not your job")
        return job_out(record, with_markers=True)

    # --- templates ---

    def template_out(template: Template) -> schemas.TemplateOut:
        return schemas.TemplateOut(
            name=template.name,
            description=schemas.JobSubmitRequest(**{**template.description}),
            defaults=template.defaults,
            parameters=template.parameters(),
        )

    @app.get(f"{API_PREFIX}/templates", response_model=schemas.TemplateListOut)
    def list_templates(token: Token = Depends(bearer)):
        return schemas.TemplateListOut(
            templates=[template_out(t) for _, t in sorted(state.templates.items())]
        )

    @app.post(f"{API_PREFIX}/templates", response_model=schemas.TemplateOut, status_code=201)
    def create_template(body: schemas.TemplateIn, token: Token = Depends(bearer)):
        template = Template(
            name=body.name,
            description=body.description.model_dump(),
            defaults=dict(body.defaults),
        )
        state.templates[template.name] = template
        return template_out(template)

    @app.post(
        f"{API_PREFIX}/templates/{{name}}/submit",
        response_model=schemas.JobOut,
        status_code=201,
    )
    def submit_template(name: str, body: schemas.TemplateSubmitRequest, token: Token = Depends(bearer)):
        template = state.templates.get(name)
        if template is None:
            raise NotFound(f"template {name}")
        parameters = {**template.defaults, **body.parameters, "user": token.subject}
        try:
            payload = template.instantiate(parameters)
        except KeyError as exc:
            raise ConfigError(f"missing template parameter {exc}") from exc
        return job_out(submit_description(payload, token))

    # --- pool, costs, timeline ---

    @app.get(f"{API_PREFIX}/pool", response_model=schemas.PoolsOut)
    def pool_state(token: Token = Depends(bearer)):
        pools = []
        for spec in state.simulation.pools.values():
            instances = []
            idle = 0
            for inst in spec.provisioner.alive_instances():
                worker = state.simulation.workers.get(inst.id)
                busy = bool(worker and worker.job_id)
                if inst.state == "running" and not busy:
                    idle += 1
                instances.append(
                    schemas.InstanceOut(
                        id=inst.id,
                        type_name=inst.type_name,
                        zone=inst.zone,
                        market=inst.market.kind,
                        state=inst.state,
                        busy=busy,
                    )
                )
            pools.append(
                schemas.PoolOut(
                    queue_class=spec.queue_class,
                    strategy=spec.strategy.label,
                    provisioned=len(instances),
                    idle=idle,
                    pending_jobs=platform.queue.pending_count(spec.queue_class),
                    active_jobs=platform.queue.active_count(spec.queue_class),
                    instances=instances,
                )
            )
        return schemas.PoolsOut(now=platform.clock.now, pools=pools)

    @app.get(f"{API_PREFIX}/pool/timeline", response_model=schemas.TimelineOut)
    def pool_timeline(source: str = "live", token: Token = Depends(bearer)):
        if source == "last-experiment":
            if not state.last_experiment or "rows" not in state.last_experiment:
                raise NotFound("no recorded scaling run")
            rows = state.last_experiment["rows"]
            points = rows[-1].get("timeline", [])
        else:
            points = state.simulation.timeline
        return schemas.TimelineOut(points=[schemas.TimelinePoint(**p) for p in points])

    @app.get(f"{API_PREFIX}/costs", response_model=schemas.CostsOut)
    def costs(token: Token = Depends(bearer)):
        spot = 0.0
        od = 0.0
        billed = 0
        for inst in platform.provider.instances.values():
            od += platform.provider.accrued_cost(inst.id, "on-demand-equivalent")
            billed += inst.billed_hours(platform.clock.now)
            if inst.market.is_spot:
                spot += platform.provider.accrued_cost(inst.id, "spot-trace")
            else:
                spot += platform.provider.accrued_cost(inst.id, "on-demand-equivalent")
        storage = (
            platform.store.storage_cost(0.0, platform.clock.now) if platform.clock.now > 0 else 0.0
        )
        return schemas.CostsOut(
            now=platform.clock.now,
            compute_spot_cost=round(spot, 4),
            compute_on_demand_equivalent_cost=round(od, 4),
            storage_cost_to_date=round(storage, 4),
            billed_instance_hours=billed,
        )

    # --- audit ---

    @app.get(f"{API_PREFIX}/audit")
    def export_audit(
        user: Optional[str] = None,
        dataset: Optional[str] = None,
        service: Optional[str] = None,
        start: Optional[float] = None,
        end: Optional[float] = None,
        format: str = "json",
        token: Token = Depends(bearer),
    ):
        records = access.export_audit(
            token, user=user, dataset=dataset, service=service, start=start, end=end
        )
        if format == "lines":
            return PlainTextResponse("\n".join(r.line() for r in records))
        return schemas.AuditOut(
            records=[
                schemas.AuditRecordOut(
                    seq=r.seq,
                    time=r.time,
                    iso_time=iso8601(r.time),
                    actor=r.actor,
                    action=r.action,
                    resource=r.resource,
                    outcome=r.outcome,
                )
                for r in records
            ]
        )

    # --- experiments and admin ---

    @app.post(f"{API_PREFIX}/experiments/run", response_model=schemas.ExperimentOut)
    def run_experiment(config: dict[str, Any], token: Token = Depends(bearer)):
        require_admin(token)
        result = run_from_config(config)
        header, rows = result.summary_table()
        data = result.to_dict()
        state.last_experiment = data
        return schemas.ExperimentOut(
            name=result.name, data=data, summary_header=header, summary_rows=rows
        )

    @app.post(f"{API_PREFIX}/admin/tick", response_model=schemas.TickOut)
    def tick(body: schemas.TickRequest, token: Token = Depends(bearer)):
        require_admin(token)
        state.simulation.step(max(1, body.ticks))
        return schemas.TickOut(
            now=platform.clock.now,
            iso_now=iso8601(platform.clock.now),
            pending_jobs=sum(
                platform.queue.pending_count(q) for q in state.simulation.pools
            ),
            active_jobs=platform.queue.active_count(),
        )

    @app.get(f"{API_PREFIX}/healthz")
    def healthz():
        return {"status": "ok", "now": platform.clock.now}

    if frontend_dir:
        app.mount("/ui", StaticFiles(directory=frontend_dir, html=True), name="ui")

    return app
