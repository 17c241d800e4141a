"""Error types shared across the platform.

Every error carries a stable machine-readable ``code`` (surfaced by the CLI
and the REST gateway) and an HTTP status used by the gateway's exception
handler.
"""


class EnclaveError(Exception):
    code = "ERROR"
    http_status = 400

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)


# --- simulated cloud provider ---

class UnknownType(EnclaveError):
    code = "UNKNOWN_TYPE"
    http_status = 404


class UnknownZone(EnclaveError):
    code = "UNKNOWN_ZONE"
    http_status = 404


class NonPositiveBid(EnclaveError):
    code = "NON_POSITIVE_BID"
    http_status = 422


class NoTrace(EnclaveError):
    code = "NO_TRACE"
    http_status = 404


class BeforeTraceStart(EnclaveError):
    code = "BEFORE_TRACE_START"
    http_status = 422


class UnknownInstance(EnclaveError):
    code = "UNKNOWN_INSTANCE"
    http_status = 404


class AlreadyEnded(EnclaveError):
    code = "ALREADY_ENDED"
    http_status = 409


# --- storage ---

class AccessDenied(EnclaveError):
    code = "ACCESS_DENIED"
    http_status = 403


class NotFound(EnclaveError):
    code = "NOT_FOUND"
    http_status = 404


class DuplicateKey(EnclaveError):
    code = "DUPLICATE_KEY"
    http_status = 409


class NonPositiveSize(EnclaveError):
    code = "NON_POSITIVE_SIZE"
    http_status = 422


class Expired(EnclaveError):
    code = "EXPIRED"
    http_status = 403


class BadSignature(EnclaveError):
    code = "BAD_SIGNATURE"
    http_status = 403


# --- security ---

class UnknownUser(EnclaveError):
    code = "UNKNOWN_USER"
    http_status = 404


class NotRegistered(EnclaveError):
    code = "NOT_REGISTERED"
    http_status = 403


class NotTrustedRole(EnclaveError):
    code = "NOT_TRUSTED_ROLE"
    http_status = 403


class NoActiveJobForUser(EnclaveError):
    code = "NO_ACTIVE_JOB_FOR_USER"
    http_status = 403


class NotAssumedToken(EnclaveError):
    code = "NOT_ASSUMED_TOKEN"
    http_status = 400


class InvalidToken(EnclaveError):
    code = "INVALID_TOKEN"
    http_status = 401


# --- job queue ---

class InvalidDescription(EnclaveError):
    code = "INVALID_DESCRIPTION"
    http_status = 422


class UnknownWorker(EnclaveError):
    code = "UNKNOWN_WORKER"
    http_status = 404


class NotAssigned(EnclaveError):
    code = "NOT_ASSIGNED"
    http_status = 409


class NotActive(EnclaveError):
    code = "NOT_ACTIVE"
    http_status = 409


class StageFailed(EnclaveError):
    code = "STAGE_FAILED"
    http_status = 409


class TimedOut(EnclaveError):
    code = "TIMED_OUT"
    http_status = 409


# --- provisioning / workload / harness ---

class NegativeVolume(EnclaveError):
    code = "NEGATIVE_VOLUME"
    http_status = 422


class NoCandidates(EnclaveError):
    code = "NO_CANDIDATES"
    http_status = 409


class InvalidSpec(EnclaveError):
    code = "INVALID_SPEC"
    http_status = 422


class InvalidParams(EnclaveError):
    code = "INVALID_PARAMS"
    http_status = 422


class ParseError(EnclaveError):
    code = "PARSE_ERROR"
    http_status = 422


class ConfigError(EnclaveError):
    code = "CONFIG_ERROR"
    http_status = 422


class IoError(EnclaveError):
    code = "IO_ERROR"
    http_status = 500
