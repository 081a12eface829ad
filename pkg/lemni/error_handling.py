"""Shared error types and location-anchored error reporting."""

from __future__ import annotations

import json
import math
import sys


class LemniError(Exception):
    """Base class for every error raised by lemni."""


class ValidationError(LemniError, ValueError):
    """Input that violates a documented precondition."""


class NumericalError(LemniError):
    """A numerical stage failed; `location` names where (θ, w, residual...)."""

    def __init__(self, message: str, *, stage: str, location: dict | None = None):
        super().__init__(message)
        self.stage = stage
        self.location = dict(location or {})


class RootSolverError(NumericalError):
    def __init__(self, message: str, location: dict | None = None):
        super().__init__(message, stage="root_solver", location=location)


class ContinuationError(NumericalError):
    def __init__(self, message: str, location: dict | None = None):
        super().__init__(message, stage="continuation", location=location)


class QuadratureError(NumericalError):
    def __init__(self, message: str, location: dict | None = None):
        super().__init__(message, stage="quadrature", location=location)


EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def _jsonable(value):
    """Make location values printable as JSON (complex numbers, numpy scalars)."""

    if isinstance(value, complex):
        return {"re": _jsonable(value.real), "im": _jsonable(value.imag)}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if hasattr(value, "item"):
        value = value.item()
        if isinstance(value, complex):
            return _jsonable(value)
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


def error_payload(exc: BaseException) -> dict:
    """Describe an exception as the dict printed on stderr."""

    payload = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, NumericalError):
        payload["stage"] = exc.stage
        payload["location"] = {k: _jsonable(v) for k, v in exc.location.items()}
    return payload


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, NumericalError):
        return EXIT_NUMERICAL
    return EXIT_VALIDATION


def report_error(exc: BaseException, stream=None) -> int:
    """Print a single-line JSON error to stderr and return the exit code."""

    stream = stream if stream is not None else sys.stderr
    print(json.dumps(error_payload(exc), sort_keys=True), file=stream)
    return exit_code_for(exc)


def require(condition: bool, message: str) -> None:
    """Raise `ValidationError` unless `condition` holds."""

    if not condition:
        raise ValidationError(message)
