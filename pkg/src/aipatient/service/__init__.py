"""HTTP service binding sessions, the graph, and the agent workflow together."""

from .app import create_app, create_app_from_parts
from .config import AdapterConfig, ConfigError, ServiceConfig, build_adapter, load_config
from .sessions import (
    InvalidProfile,
    SessionBusy,
    SessionStore,
    UnknownPatient,
    UnknownSession,
    patient_roster,
)

__all__ = [
    "AdapterConfig",
    "ConfigError",
    "InvalidProfile",
    "ServiceConfig",
    "SessionBusy",
    "SessionStore",
    "UnknownPatient",
    "UnknownSession",
    "build_adapter",
    "create_app",
    "create_app_from_parts",
    "load_config",
    "patient_roster",
]
