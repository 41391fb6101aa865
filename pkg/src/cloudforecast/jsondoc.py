"""Helpers for the JSON-based document formats (workflows, catalogs, pools).

All formats reject unknown fields so typos surface instead of silently
taking defaults.
"""

import json
from typing import Any, Iterable

from .errors import DocumentFormatError


def load_document(text: str, what: str = "document") -> Any:
    """Parse JSON text, reporting the position on syntax errors."""
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentFormatError(
            f"invalid {what}: line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc


def check_fields(
    obj: Any,
    required: Iterable[str],
    optional: Iterable[str],
    context: str,
) -> dict:
    """Require `obj` to be a mapping with exactly the allowed fields."""
    if not isinstance(obj, dict):
        raise DocumentFormatError(f"{context}: expected an object, got {type(obj).__name__}")
    required = set(required)
    allowed = required | set(optional)
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise DocumentFormatError(f"{context}: unknown field(s): {', '.join(unknown)}")
    missing = sorted(required - set(obj))
    if missing:
        raise DocumentFormatError(f"{context}: missing required field(s): {', '.join(missing)}")
    return obj


def as_number(value: Any, context: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise DocumentFormatError(f"{context}: expected a number, got {value!r}")
    return float(value)


def as_string(value: Any, context: str) -> str:
    if not isinstance(value, str):
        raise DocumentFormatError(f"{context}: expected a string, got {value!r}")
    return value
