"""
Sentry error tracking for pipeline runs.

Disabled unless SENTRY_DSN is set; the CLI calls init_sentry() once at
startup and reports stage failures through capture_exception(). Stage and
scene identifiers become tags, so a failing scene can be searched by id;
everything else goes into extras. Failures are grouped by stage and error
class instead of by stack trace, so one bad backend does not open one issue
per scene.
"""

import logging
import os
from typing import Any, Literal

import sentry_sdk
from sentry_sdk.integrations.logging import LoggingIntegration

from config.settings import settings
from src import __version__
from src.errors import ReefError

TAG_KEYS = frozenset({"stage", "scene_id", "command"})
Level = Literal["fatal", "critical", "error", "warning", "info", "debug"]

_initialized = False


def init_sentry() -> bool:
    """
    Initialize the SDK when a DSN is configured (SENTRY_DSN env or settings).

    Log records at ERROR and above become events; lower levels are kept as
    breadcrumbs.

    Returns:
        True when the SDK was initialized.
    """
    global _initialized
    dsn = os.getenv("SENTRY_DSN") or settings.observability.sentry_dsn
    if not dsn:
        return False

    sentry_sdk.init(
        dsn=dsn,
        environment=os.getenv("SENTRY_ENVIRONMENT", settings.observability.sentry_environment),
        traces_sample_rate=0.0,
        integrations=[LoggingIntegration(level=logging.INFO, event_level=logging.ERROR)],
        send_default_pii=False,
        release=f"reefforge@{__version__}",
    )
    _initialized = True
    return True


def is_enabled() -> bool:
    return _initialized


def set_tags(**tags: Any) -> None:
    """Tags for every later event of the run, e.g. set_tags(command="synth")."""
    for key, value in tags.items():
        sentry_sdk.set_tag(key, str(value))


def _fill_scope(scope: Any, context: dict[str, Any]) -> None:
    for key, value in context.items():
        if value is None or value == "":
            continue
        if key in TAG_KEYS:
            scope.set_tag(key, str(value))
        else:
            scope.set_extra(key, value)


def capture_exception(error: BaseException, **context: Any) -> None:
    """
    Report a failure with its pipeline context.

    Args:
        error: The exception
        **context: stage / scene_id / command become tags, the rest extras
    """
    with sentry_sdk.new_scope() as scope:
        _fill_scope(scope, context)
        if isinstance(error, ReefError):
            scope.set_tag("exit_code", str(error.exit_code))
        scope.fingerprint = [str(context.get("stage") or context.get("command") or "run"), type(error).__name__]
        sentry_sdk.capture_exception(error)


def capture_message(message: str, level: Level = "info", **context: Any) -> None:
    """Report a message (e.g. a stage summary with failed scenes)."""
    with sentry_sdk.new_scope() as scope:
        _fill_scope(scope, context)
        sentry_sdk.capture_message(message, level=level)
