from .app import create_app, demo_state, ServiceState

__all__ = ["create_app", "demo_state", "ServiceState"]
