"""Observability module for error tracking."""

from .sentry_config import (
    capture_exception,
    capture_message,
    init_sentry,
    is_enabled,
    set_tags,
)

__all__ = [
    "init_sentry",
    "is_enabled",
    "capture_exception",
    "capture_message",
    "set_tags",
]
