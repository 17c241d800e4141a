"""Tiered object store with lifecycle migration, staging, signed URLs, and
per-tier cost accounting.

Objects live in one of four tiers (block, hot, infrequent, archive) trading
storage cost against retrieval latency. A lifecycle pass moves idle objects
one step colder; only staging ever moves an object warmer. Payloads are
metadata-only: staging is modeled by receipts, not byte movement.
"""
from __future__ import annotations

import hashlib
import hmac
import re
from dataclasses import dataclass, field
from typing import Optional

from .errors import (
    AccessDenied,
    BadSignature,
    DuplicateKey,
    Expired,
    InvalidParams,
    NonPositiveSize,
    NotFound,
)
from .security import AccessController, Token
from .simclock import Clock, DAY, MONTH

BLOCK = "block"
HOT = "hot"
INFREQUENT = "infrequent"
ARCHIVE = "archive"
TIERS = (BLOCK, HOT, INFREQUENT, ARCHIVE)

URL_SCHEME = "kotta"
_URL_RE = re.compile(r"^kotta://([^/?]+)/(.+)\?exp=(\d+)&sig=([0-9a-f]+)$")


@dataclass(frozen=True)
class TierSpec:
    name: str
    storage_cost_per_gb_month: float
    retrieval_latency_s: float
    availability: str  # "mounted" | "immediate" | "delayed"


def default_tiers() -> dict[str, TierSpec]:
    return {
        BLOCK: TierSpec(BLOCK, 0.10, 0.0, "mounted"),
        HOT: TierSpec(HOT, 0.03, 0.0, "immediate"),
        INFREQUENT: TierSpec(INFREQUENT, 0.0125, 60.0, "immediate"),
        ARCHIVE: TierSpec(ARCHIVE, 0.007, 4 * 3600.0, "delayed"),
    }


def tiers_from_config(config: dict) -> dict[str, TierSpec]:
    """Tier table from parsed configuration, validated on load."""
    tiers = default_tiers()
    for name, entry in config.items():
        if name not in TIERS:
            raise InvalidParams(f"unknown tier {name}")
        base = tiers[name]
        tiers[name] = TierSpec(
            name=name,
            storage_cost_per_gb_month=float(
                entry.get("storage_cost_per_gb_month", base.storage_cost_per_gb_month)
            ),
            retrieval_latency_s=float(entry.get("retrieval_latency_s", base.retrieval_latency_s)),
            availability=entry.get("availability", base.availability),
        )
    return validate_tiers(tiers)


def lifecycle_from_config(config: dict) -> "LifecyclePolicy":
    return LifecyclePolicy(
        hot_to_infrequent_after_s=float(config.get("hot_to_infrequent_after_days", 30)) * DAY,
        infrequent_to_archive_after_s=float(config.get("infrequent_to_archive_after_days", 90))
        * DAY,
    )


def validate_tiers(tiers: dict[str, TierSpec]) -> dict[str, TierSpec]:
    """Reject tier configurations that break the cost and latency ordering:
    block must cost more than 3x hot, hot > infrequent > archive, and archive
    must have the largest retrieval latency."""
    missing = [t for t in TIERS if t not in tiers]
    if missing:
        raise InvalidParams(f"missing tiers: {missing}")
    block, hot, infrequent, archive = (tiers[t] for t in TIERS)
    if block.storage_cost_per_gb_month <= 3 * hot.storage_cost_per_gb_month:
        raise InvalidParams("block tier must cost more than 3x the hot tier")
    if not (
        hot.storage_cost_per_gb_month
        > infrequent.storage_cost_per_gb_month
        > archive.storage_cost_per_gb_month
    ):
        raise InvalidParams("tier costs must decrease from hot to archive")
    if any(archive.retrieval_latency_s < t.retrieval_latency_s for t in tiers.values()):
        raise InvalidParams("archive must have the largest retrieval latency")
    return tiers


@dataclass(frozen=True)
class LifecyclePolicy:
    hot_to_infrequent_after_s: float = 30 * DAY
    infrequent_to_archive_after_s: float = 90 * DAY

    def __post_init__(self):
        if self.hot_to_infrequent_after_s <= 0 or self.infrequent_to_archive_after_s <= 0:
            raise InvalidParams("lifecycle thresholds must be positive")

    @property
    def archive_idle_threshold_s(self) -> float:
        return self.hot_to_infrequent_after_s + self.infrequent_to_archive_after_s


@dataclass
class StoredObject:
    bucket: str
    key: str
    size_gb: float
    tier: str
    owner: str
    created_at: float
    last_access: float
    encrypted_at_rest: bool = True
    # (time, tier) transitions, first entry at creation; drives cost accounting
    tier_history: list[tuple[float, str]] = field(default_factory=list)

    @property
    def ref(self) -> str:
        return f"{self.bucket}/{self.key}"

    def view(self) -> dict:
        return {
            "bucket": self.bucket,
            "key": self.key,
            "size_gb": self.size_gb,
            "tier": self.tier,
            "owner": self.owner,
            "created_at": self.created_at,
            "last_access": self.last_access,
            "encrypted_at_rest": self.encrypted_at_rest,
        }


@dataclass
class Bucket:
    name: str
    default_tier: str = HOT
    policy_refs: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class StagingReceipt:
    bucket: str
    key: str
    requested_at: float
    available_at: float
    from_tier: str


@dataclass(frozen=True)
class MigrationEvent:
    time: float
    bucket: str
    key: str
    from_tier: str
    to_tier: str


@dataclass(frozen=True)
class SignedUrl:
    bucket: str
    key: str
    expiry: float  # unix seconds
    signature: str

    def render(self) -> str:
        return f"{URL_SCHEME}://{self.bucket}/{self.key}?exp={int(self.expiry)}&sig={self.signature}"

    @classmethod
    def parse(cls, text: str) -> "SignedUrl":
        m = _URL_RE.match(text.strip())
        if m is None:
            raise BadSignature(f"unparseable url: {text!r}")
        bucket, key, exp, sig = m.groups()
        return cls(bucket=bucket, key=key, expiry=float(int(exp)), signature=sig)


class ObjectStore:
    """Metadata registry for buckets and objects in one deployment."""

    LIFECYCLE_ACTOR = "service:lifecycle"

    def __init__(
        self,
        clock: Clock,
        access: AccessController,
        tiers: Optional[dict[str, TierSpec]] = None,
        lifecycle: LifecyclePolicy = LifecyclePolicy(),
        url_secret: bytes = b"enclave-dev-secret",
    ):
        self.clock = clock
        self.access = access
        self.tiers = validate_tiers(tiers or default_tiers())
        self.lifecycle = lifecycle
        self.url_secret = url_secret
        self.buckets: dict[str, Bucket] = {}
        self.objects: dict[tuple[str, str], StoredObject] = {}
        self._signers: dict[str, str] = {}  # signature -> signing user
        self._pending_retrievals: list[tuple[float, tuple[str, str]]] = []
        self._last_lifecycle_at = float("-inf")

    # --- buckets ---

    def create_bucket(self, name: str, default_tier: str = HOT) -> Bucket:
        if default_tier not in self.tiers:
            raise InvalidParams(f"unknown tier {default_tier}")
        bucket = self.buckets.get(name)
        if bucket is None:
            bucket = Bucket(name, default_tier)
            self.buckets[name] = bucket
        return bucket

    # --- object operations ---

    def put(self, bucket: str, key: str, size_gb: float, owner: str, token: Token) -> StoredObject:
        """Create an object at the bucket's default tier."""
        if not self.access.check_access(token, "write", f"{bucket}/{key}"):
            raise AccessDenied(f"write {bucket}/{key}")
        return self._create(bucket, key, size_gb, owner)

    def system_put(self, bucket: str, key: str, size_gb: float, owner: str, actor: str) -> StoredObject:
        """Internal write path for platform services (e.g. output staging);
        audited under the service actor."""
        self.access.audit.append(self.clock.now, actor, "write", f"{bucket}/{key}", "allowed")
        return self._create(bucket, key, size_gb, owner)

    def _create(self, bucket: str, key: str, size_gb: float, owner: str) -> StoredObject:
        if size_gb <= 0:
            raise NonPositiveSize(f"size_gb={size_gb}")
        if bucket not in self.buckets:
            raise NotFound(f"bucket {bucket}")
        if (bucket, key) in self.objects:
            raise DuplicateKey(f"{bucket}/{key}")
        now = self.clock.now
        tier = self.buckets[bucket].default_tier
        obj = StoredObject(
            bucket=bucket,
            key=key,
            size_gb=size_gb,
            tier=tier,
            owner=owner,
            created_at=now,
            last_access=now,
            tier_history=[(now, tier)],
        )
        self.objects[(bucket, key)] = obj
        return obj

    def describe(self, bucket: str, key: str, token: Token) -> StoredObject:
        """Read-checked metadata view; does not count as a data access."""
        if not self.access.check_access(token, "read", f"{bucket}/{key}"):
            raise AccessDenied(f"read {bucket}/{key}")
        return self._lookup(bucket, key)

    def list_objects(self, bucket: str, prefix: str = "", token: Optional[Token] = None) -> list[StoredObject]:
        if token is not None:
            resource = f"{bucket}/{prefix}" if prefix else bucket
            if not self.access.check_access(token, "list", resource):
                raise AccessDenied(f"list {resource}")
        if bucket not in self.buckets:
            raise NotFound(f"bucket {bucket}")
        return [
            obj
            for (b, k), obj in sorted(self.objects.items())
            if b == bucket and k.startswith(prefix)
        ]

    def stage(self, bucket: str, key: str, token: Token) -> StagingReceipt:
        """Request an object for compute. Hot data is available immediately;
        colder tiers pay their retrieval latency (plus the hot tier's, since
        cold data is rehydrated through it). Archived objects move back to
        the hot tier once retrieval completes."""
        self.settle(self.clock.now)
        if not self.access.check_access(token, "read", f"{bucket}/{key}"):
            raise AccessDenied(f"read {bucket}/{key}")
        obj = self._lookup(bucket, key)
        now = self.clock.now
        obj.last_access = now
        latency = self.tiers[obj.tier].retrieval_latency_s
        if obj.tier in (INFREQUENT, ARCHIVE):
            latency += self.tiers[HOT].retrieval_latency_s
        available_at = now + latency
        if obj.tier == ARCHIVE:
            self._pending_retrievals.append((available_at, (bucket, key)))
        return StagingReceipt(
            bucket=bucket,
            key=key,
            requested_at=now,
            available_at=available_at,
            from_tier=obj.tier,
        )

    def settle(self, t: float) -> None:
        """Apply archive retrievals whose completion time has arrived."""
        if not self._pending_retrievals:
            return
        remaining = []
        for available_at, ref in sorted(self._pending_retrievals):
            obj = self.objects.get(ref)
            if obj is None:
                continue
            if available_at <= t:
                if obj.tier == ARCHIVE:
                    obj.tier = HOT
                    obj.tier_history.append((available_at, HOT))
                    self.access.audit.append(
                        available_at, self.LIFECYCLE_ACTOR, "retrieve", obj.ref, "allowed"
                    )
            else:
                remaining.append((available_at, ref))
        self._pending_retrievals = remaining

    def run_lifecycle(self, t: float, policy: Optional[LifecyclePolicy] = None) -> list[MigrationEvent]:
        """Move idle objects one step colder. Each pass migrates an object at
        most one tier, so hot data reaches the archive only across passes."""
        if t < self._last_lifecycle_at:
            raise InvalidParams("lifecycle time moved backwards")
        self._last_lifecycle_at = t
        self.settle(t)
        policy = policy or self.lifecycle
        events = []
        pending = {ref for _, ref in self._pending_retrievals}
        for ref in sorted(self.objects):
            obj = self.objects[ref]
            if ref in pending or obj.tier in (BLOCK, ARCHIVE):
                continue
            idle = t - obj.last_access
            target = None
            if obj.tier == HOT and idle >= policy.hot_to_infrequent_after_s:
                target = INFREQUENT
            elif obj.tier == INFREQUENT and idle >= policy.archive_idle_threshold_s:
                target = ARCHIVE
            if target is None:
                continue
            events.append(MigrationEvent(t, obj.bucket, obj.key, obj.tier, target))
            obj.tier = target
            obj.tier_history.append((t, target))
            self.access.audit.append(t, self.LIFECYCLE_ACTOR, "migrate", obj.ref, "allowed")
        return events

    # --- signed URLs ---

    def _signature(self, bucket: str, key: str, expiry: float) -> str:
        message = f"{bucket}\n{key}\n{int(expiry)}".encode()
        return hmac.new(self.url_secret, message, hashlib.sha256).hexdigest()

    def sign_url(self, bucket: str, key: str, ttl_s: float, token: Token) -> SignedUrl:
        """Mint a short-term anonymous URL for an object the caller can read."""
        if ttl_s <= 0:
            raise InvalidParams("ttl must be positive")
        if not self.access.check_access(token, "read", f"{bucket}/{key}"):
            raise AccessDenied(f"read {bucket}/{key}")
        self._lookup(bucket, key)
        expiry = self.clock.now + ttl_s
        url = SignedUrl(bucket, key, expiry, self._signature(bucket, key, expiry))
        self._signers[url.signature] = token.subject
        return url

    def fetch_by_url(self, url: str | SignedUrl) -> StoredObject:
        """Anonymous fetch: succeeds only for an unexpired URL whose signature
        matches; the access is audited against the signing user."""
        parsed = SignedUrl.parse(url) if isinstance(url, str) else url
        expected = self._signature(parsed.bucket, parsed.key, parsed.expiry)
        signer = self._signers.get(parsed.signature)
        actor = f"user:{signer}:via:signed-url" if signer else "anonymous:signed-url"
        ref = f"{parsed.bucket}/{parsed.key}"
        if not hmac.compare_digest(expected, parsed.signature):
            self.access.audit.append(self.clock.now, actor, "fetch-url", ref, "denied")
            raise BadSignature(ref)
        if self.clock.now >= parsed.expiry:
            self.access.audit.append(self.clock.now, actor, "fetch-url", ref, "denied")
            raise Expired(ref)
        self.settle(self.clock.now)
        obj = self._lookup(parsed.bucket, parsed.key)
        obj.last_access = self.clock.now
        self.access.audit.append(self.clock.now, actor, "fetch-url", ref, "allowed")
        return obj

    # --- cost accounting ---

    def storage_cost(self, start: float, end: float) -> float:
        """Total storage cost over [start, end): each object is charged per
        GB-month at the rate of whichever tier it occupied, sub-interval by
        sub-interval."""
        if end <= start:
            raise InvalidParams("period must be positive")
        total = 0.0
        for obj in self.objects.values():
            history = obj.tier_history
            for i, (t0, tier) in enumerate(history):
                t1 = history[i + 1][0] if i + 1 < len(history) else end
                lo, hi = max(t0, start), min(t1, end)
                if hi <= lo:
                    continue
                months = (hi - lo) / MONTH
                total += obj.size_gb * self.tiers[tier].storage_cost_per_gb_month * months
        return total

    def _lookup(self, bucket: str, key: str) -> StoredObject:
        obj = self.objects.get((bucket, key))
        if obj is None:
            raise NotFound(f"{bucket}/{key}")
        return obj
