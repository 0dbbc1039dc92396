"""Human-evaluation service: sessions, transcripts, HTTP API."""

from .app import create_app
from .core import (
    DEFAULT_SESSION_CAP,
    MIN_TURN_CHOICES,
    STRATEGIES,
    EvaluationService,
    ServiceConfig,
    Session,
    Turn,
    load_questionnaire,
    model_fingerprint,
)
from .transcripts import (
    RECORD_FORMAT,
    RECORD_VERSION,
    TranscriptStore,
    encode_record,
    load_transcripts,
    metrics_inputs,
    validate_record,
)

__all__ = [
    "DEFAULT_SESSION_CAP",
    "MIN_TURN_CHOICES",
    "RECORD_FORMAT",
    "RECORD_VERSION",
    "STRATEGIES",
    "EvaluationService",
    "ServiceConfig",
    "Session",
    "TranscriptStore",
    "Turn",
    "create_app",
    "encode_record",
    "load_questionnaire",
    "load_transcripts",
    "metrics_inputs",
    "model_fingerprint",
    "validate_record",
]
