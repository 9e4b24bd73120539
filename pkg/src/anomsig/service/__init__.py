"""HTTP service wrapping the core package."""

from .app import create_app
from .schemas import (
    HealthResponse,
    OracleCheckResponse,
    StudyParams,
    StudyRequest,
    StudyResponse,
    TestOneRequest,
    TrainRequest,
    TrainResponse,
)

__all__ = [
    "create_app",
    "HealthResponse",
    "OracleCheckResponse",
    "StudyParams",
    "StudyRequest",
    "StudyResponse",
    "TestOneRequest",
    "TrainRequest",
    "TrainResponse",
]
