"""Experiment persistence and the 2AFC trial-serving HTTP service."""

from prosodykit.session.service import build_app
from prosodykit.session.store import (
    PAYLOAD_VERSION,
    DemographicField,
    ExperimentConfig,
    QuestionnaireItem,
    SessionError,
    SessionState,
    SessionStore,
    config_from_json_file,
)

__all__ = [
    "PAYLOAD_VERSION",
    "DemographicField",
    "ExperimentConfig",
    "QuestionnaireItem",
    "SessionError",
    "SessionState",
    "SessionStore",
    "build_app",
    "config_from_json_file",
]
