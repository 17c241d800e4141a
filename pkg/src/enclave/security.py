"""Role-based access control: users, roles, policies, short-lived tokens,
role assumption by workers, and a gap-free audit log.

Access is deny-by-default: a request is allowed only if some policy reachable
through the token's roles explicitly grants the action on the resource. New
users start with no roles at all.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from .errors import (
    AccessDenied,
    InvalidToken,
    NoActiveJobForUser,
    NotAssumedToken,
    NotRegistered,
    NotTrustedRole,
    UnknownUser,
)
from .simclock import Clock, iso8601

ACTIONS = ("read", "write", "list")

DEFAULT_TOKEN_LIFETIME = 3600.0  # login and internal tokens
DEFAULT_ASSUME_WINDOW = 900.0  # assumed-role tokens

TASK_EXECUTOR = "task-executor"
WEB_SERVER = "web-server"


@dataclass
class User:
    id: str
    display_name: str = ""
    registered: bool = True
    roles: set[str] = field(default_factory=set)


@dataclass(frozen=True)
class Policy:
    id: str
    actions: frozenset[str]
    resource: str  # bucket or key-prefix pattern, path-segment anchored
    effect: str = "allow"

    def matches(self, action: str, resource: str) -> bool:
        if action not in self.actions:
            return False
        pattern = self.resource
        if resource == pattern:
            return True
        if pattern.endswith("/"):
            return resource.startswith(pattern)
        return resource.startswith(pattern + "/")


@dataclass
class Role:
    id: str
    policies: set[str] = field(default_factory=set)
    internal: bool = False


@dataclass
class Token:
    id: str
    subject: str  # user id, instance id, or service name
    kind: str  # "user" | "internal" | "assumed"
    roles: tuple[str, ...]
    issued_at: float
    expiry: float
    parent: Optional[str] = None  # parent token id for assumed roles
    parent_subject: str = ""
    revoked: bool = False

    @property
    def actor(self) -> str:
        if self.kind == "user":
            return f"user:{self.subject}"
        if self.kind == "assumed":
            return f"user:{self.subject}:via:{self.parent_subject}"
        return f"service:{self.roles[0]}:{self.subject}" if self.roles else f"service:{self.subject}"


@dataclass(frozen=True)
class AuditRecord:
    seq: int
    time: float
    actor: str
    action: str
    resource: str
    outcome: str  # "allowed" | "denied"

    def line(self) -> str:
        return f"{self.seq}|{iso8601(self.time)}|{self.actor}|{self.action}|{self.resource}|{self.outcome}"


@dataclass(frozen=True)
class Decision:
    allowed: bool
    matched_policy: Optional[str] = None

    def __bool__(self) -> bool:
        return self.allowed


class AuditLog:
    """Append-only, gap-free sequence of audit records."""

    def __init__(self):
        self.records: list[AuditRecord] = []

    def append(self, time: float, actor: str, action: str, resource: str, outcome: str) -> AuditRecord:
        record = AuditRecord(len(self.records), time, actor, action, resource, outcome)
        self.records.append(record)
        return record

    def export_lines(self, records: Optional[list[AuditRecord]] = None) -> str:
        rows = self.records if records is None else records
        return "\n".join(r.line() for r in rows)


class AccessController:
    """Token issuer and policy evaluator for one deployment."""

    def __init__(
        self,
        clock: Clock,
        max_token_lifetime: float = DEFAULT_TOKEN_LIFETIME,
        assume_window: float = DEFAULT_ASSUME_WINDOW,
        trusted_assume_role: str = TASK_EXECUTOR,
        admin_roles: tuple[str, ...] = ("admin",),
    ):
        self.clock = clock
        self.max_token_lifetime = max_token_lifetime
        self.assume_window = assume_window
        self.trusted_assume_role = trusted_assume_role
        self.admin_roles = set(admin_roles)
        self.users: dict[str, User] = {}
        self.roles: dict[str, Role] = {}
        self.policies: dict[str, Policy] = {}
        self.audit = AuditLog()
        self._tokens: dict[str, Token] = {}
        self._seq = 0
        # set by the job queue: (instance_id, user_id) -> bool
        self._active_job_checker: Callable[[str, str], bool] = lambda w, u: False

    def set_active_job_checker(self, checker: Callable[[str, str], bool]) -> None:
        self._active_job_checker = checker

    # --- registry ---

    def add_user(self, user_id: str, display_name: str = "", registered: bool = True) -> User:
        user = User(user_id, display_name, registered)
        self.users[user_id] = user
        return user

    def add_policy(self, policy_id: str, actions, resource: str) -> Policy:
        policy = Policy(policy_id, frozenset(actions), resource)
        self.policies[policy_id] = policy
        return policy

    def add_role(self, role_id: str, policy_ids=(), internal: bool = False) -> Role:
        role = Role(role_id, set(policy_ids), internal)
        self.roles[role_id] = role
        return role

    def grant_role(self, user_id: str, role_id: str) -> None:
        user = self.users.get(user_id)
        if user is None:
            raise UnknownUser(user_id)
        if not user.registered:
            raise NotRegistered(user_id)
        if role_id not in self.roles:
            raise KeyError(f"unknown role {role_id}")
        if self.roles[role_id].internal:
            raise AccessDenied(f"internal role {role_id} is not assignable to users")
        user.roles.add(role_id)

    # --- tokens ---

    def login(self, user_id: str) -> Token:
        """Issue a short-lived token carrying the user's current roles."""
        user = self.users.get(user_id)
        if user is None:
            raise UnknownUser(user_id)
        if not user.registered:
            self.audit.append(self.clock.now, f"user:{user_id}", "login", "-", "denied")
            raise NotRegistered(user_id)
        token = self._issue(
            subject=user_id,
            kind="user",
            roles=tuple(sorted(user.roles)),
            lifetime=self.max_token_lifetime,
        )
        self.audit.append(self.clock.now, token.actor, "login", "-", "allowed")
        return token

    def issue_internal_token(self, role_id: str, subject: str) -> Token:
        """Credential for a platform service or worker node acting under an
        internal role."""
        role = self.roles.get(role_id)
        if role is None or not role.internal:
            raise NotTrustedRole(role_id)
        token = self._issue(
            subject=subject, kind="internal", roles=(role_id,), lifetime=self.max_token_lifetime
        )
        self.audit.append(self.clock.now, token.actor, "issue-token", "-", "allowed")
        return token

    def assume_role(self, worker_token: Token, target_user: str) -> Token:
        """Let a trusted worker inherit a user's roles for a short window.

        Requires an active job owned by the target user and assigned to the
        calling worker, so a worker can only ever act for the user whose job
        it is running.
        """
        token = self._live(worker_token)
        if self.trusted_assume_role not in token.roles:
            self.audit.append(
                self.clock.now, token.actor, "assume-role", f"user:{target_user}", "denied"
            )
            raise NotTrustedRole(str(token.roles))
        user = self.users.get(target_user)
        if user is None:
            raise UnknownUser(target_user)
        if not user.registered:
            raise NotRegistered(target_user)
        if not self._active_job_checker(token.subject, target_user):
            self.audit.append(
                self.clock.now, token.actor, "assume-role", f"user:{target_user}", "denied"
            )
            raise NoActiveJobForUser(f"{token.subject} has no active job for {target_user}")
        assumed = self._issue(
            subject=target_user,
            kind="assumed",
            roles=tuple(sorted(user.roles)),
            lifetime=self.assume_window,
            parent=token,
        )
        self.audit.append(self.clock.now, assumed.actor, "assume-role", f"user:{target_user}", "allowed")
        return assumed

    def release_role(self, assumed_token: Token) -> None:
        """Invalidate an assumed-role token immediately."""
        token = self._tokens.get(assumed_token.id)
        if token is None or token.kind != "assumed" or token.revoked:
            raise NotAssumedToken(assumed_token.id)
        token.revoked = True
        self.audit.append(self.clock.now, token.actor, "release-role", "-", "allowed")

    # --- decisions ---

    def check_access(self, token: Token, action: str, resource: str) -> Decision:
        """Evaluate a request. Denial is a value, not an error; every call
        appends exactly one audit record."""
        live = self._tokens.get(token.id)
        actor = token.actor
        decision = Decision(False)
        if live is not None and not live.revoked and self.clock.now < live.expiry:
            for role_id in live.roles:
                role = self.roles.get(role_id)
                if role is None:
                    continue
                for policy_id in sorted(role.policies):
                    policy = self.policies.get(policy_id)
                    if policy is not None and policy.matches(action, resource):
                        decision = Decision(True, policy_id)
                        break
                if decision.allowed:
                    break
        self.audit.append(
            self.clock.now, actor, action, resource, "allowed" if decision.allowed else "denied"
        )
        return decision

    def is_admin(self, token: Token) -> bool:
        live = self._tokens.get(token.id)
        if live is None or live.revoked or self.clock.now >= live.expiry:
            return False
        return bool(set(live.roles) & self.admin_roles)

    def resolve(self, token_id: str) -> Optional[Token]:
        """Look up a live token by id (bearer auth); None if unknown,
        revoked, or expired."""
        token = self._tokens.get(token_id)
        if token is None or token.revoked or self.clock.now >= token.expiry:
            return None
        return token

    # --- audit export ---

    def export_audit(
        self,
        token: Token,
        user: Optional[str] = None,
        dataset: Optional[str] = None,
        service: Optional[str] = None,
        start: Optional[float] = None,
        end: Optional[float] = None,
    ) -> list[AuditRecord]:
        """Project the audit log by user, dataset (resource prefix), or
        service, in sequence order. Admin only; the log is never mutated."""
        if not self.is_admin(token):
            raise AccessDenied("audit export requires an internal admin role")
        out = []
        for record in self.audit.records:
            if start is not None and record.time < start:
                continue
            if end is not None and record.time >= end:
                continue
            if user is not None and not self._actor_is_user(record.actor, user):
                continue
            if service is not None and not record.actor.startswith(f"service:{service}"):
                continue
            if dataset is not None and not (
                record.resource == dataset or record.resource.startswith(dataset)
            ):
                continue
            out.append(record)
        return out

    @staticmethod
    def _actor_is_user(actor: str, user_id: str) -> bool:
        return actor == f"user:{user_id}" or actor.startswith(f"user:{user_id}:via:")

    # --- internals ---

    def _issue(self, subject, kind, roles, lifetime, parent: Optional[Token] = None) -> Token:
        self._seq += 1
        token = Token(
            id=f"tok-{self._seq:06d}",
            subject=subject,
            kind=kind,
            roles=roles,
            issued_at=self.clock.now,
            expiry=self.clock.now + lifetime,
            parent=parent.id if parent else None,
        )
        if parent is not None:
            token.parent_subject = parent.subject
        self._tokens[token.id] = token
        return token

    def _live(self, token: Token) -> Token:
        live = self._tokens.get(token.id)
        if live is None or live.revoked:
            raise InvalidToken(token.id)
        if self.clock.now >= live.expiry:
            raise InvalidToken(f"{token.id} expired")
        return live
