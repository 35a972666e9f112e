import json
import logging
import re
import sys
from collections.abc import Callable
from pathlib import Path

from dualsmooth.engine.exceptions import INPUT_ERROR, NUMERICAL_ERROR, BaseError
from dualsmooth.models import ErrorReport
from pydantic import ValidationError

logger = logging.getLogger(__name__)

Handler = Callable[[Exception, Path | None], tuple[ErrorReport, int]]


def _key_location(source: Path, loc: tuple) -> str | None:
    """Anchor a validation error at the deepest named key of its location."""
    try:
        text = source.read_text()
    except OSError:
        return None
    keys = [part for part in loc if isinstance(part, str)]
    for key in reversed(keys):
        match = re.search(rf'"{re.escape(key)}"\s*:', text)
        if match:
            line = text.count("\n", 0, match.start()) + 1
            col = match.start() - text.rfind("\n", 0, match.start())
            return f"{source}:{line}:{col}"
    return f"{source}:1:1"


def json_decode_exception_handler(exc: json.JSONDecodeError, source: Path | None) -> tuple[ErrorReport, int]:
    """Malformed JSON, anchored at the parser's position."""
    report = ErrorReport(
        detail=f"Malformed scenario JSON: {exc.msg}",
        error_code="MALFORMED_JSON",
        location=f"{source}:{exc.lineno}:{exc.colno}" if source else None,
    )
    return report, INPUT_ERROR


def validation_exception_handler(exc: ValidationError, source: Path | None) -> tuple[ErrorReport, int]:
    """Schema violations; anchored at the first offending key."""
    errors = exc.errors(include_url=False, include_input=False)
    first = errors[0] if errors else {"loc": (), "msg": str(exc)}
    path = ".".join(str(part) for part in first["loc"]) or "<root>"
    report = ErrorReport(
        detail=f"Scenario validation failed at {path}: {first['msg']}",
        error_code="VALIDATION_ERROR",
        location=_key_location(source, first["loc"]) if source else None,
        context={"errors": [{"loc": list(e["loc"]), "msg": e["msg"]} for e in errors]},
    )
    return report, INPUT_ERROR


def business_logic_exception_handler(exc: BaseError, source: Path | None) -> tuple[ErrorReport, int]:
    report = ErrorReport(
        detail=exc.detail,
        error_code=exc.error_code,
        location=str(source) if source else None,
        context=exc.context,
    )
    return report, exc.exit_code


def file_not_found_exception_handler(exc: FileNotFoundError, source: Path | None) -> tuple[ErrorReport, int]:
    return ErrorReport(detail=f"File not found: {exc.filename}", error_code="FILE_NOT_FOUND"), INPUT_ERROR


def generic_exception_handler(exc: Exception, source: Path | None) -> tuple[ErrorReport, int]:
    logger.exception("Unhandled exception", exc_info=exc)
    report = ErrorReport(detail=f"Unexpected error: {exc}", error_code="INTERNAL_ERROR")
    return report, NUMERICAL_ERROR


def register_exception_handlers() -> dict[type[Exception], Handler]:
    """Handlers in lookup order; the first matching type wins."""
    return {
        json.JSONDecodeError: json_decode_exception_handler,
        ValidationError: validation_exception_handler,
        BaseError: business_logic_exception_handler,
        FileNotFoundError: file_not_found_exception_handler,
        Exception: generic_exception_handler,
    }


def handle_exception(exc: Exception, source: Path | None = None) -> int:
    """Report ``exc`` on stderr and return the process exit code."""
    for exc_type, handler in register_exception_handlers().items():
        if isinstance(exc, exc_type):
            report, code = handler(exc, source)
            break
    prefix = f"{report.location}: " if report.location else ""
    print(f"error: {prefix}{report.detail} [{report.error_code}]", file=sys.stderr)
    print(report.model_dump_json(exclude_none=True), file=sys.stderr)
    logger.debug(f"{exc.__class__.__name__} mapped to exit code {code}")
    return code
