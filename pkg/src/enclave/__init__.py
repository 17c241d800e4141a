"""Secure data enclave: tiered storage, RBAC, and elastic job execution
over a deterministic simulated cloud provider."""

__version__ = "0.1.0"
