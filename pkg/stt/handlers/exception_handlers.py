import functools
import logging
import sys
from typing import Callable

from stt.core.exceptions import ConfigurationException, ExportException, SttException

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ASSERTION = 1
EXIT_USAGE = 2


def _report(message: str):
    print(f"error: {message}", file=sys.stderr)


def configuration_exception_handler(exc: ConfigurationException) -> int:
    _report(exc.detail)
    return exc.exit_code


def export_exception_handler(exc: ExportException) -> int:
    _report(f"cannot write {exc.detail}")
    return exc.exit_code


def stt_exception_handler(exc: SttException) -> int:
    logger.error("%s: %s", type(exc).__name__, exc.detail)
    _report(exc.detail)
    return exc.exit_code


def unexpected_exception_handler(exc: Exception) -> int:
    logger.exception("Unexpected failure: %s", exc)
    return EXIT_ASSERTION


HANDLERS = [
    (ConfigurationException, configuration_exception_handler),
    (ExportException, export_exception_handler),
    (SttException, stt_exception_handler),
]


def handle_exception(exc: Exception) -> int:
    for exc_type, handler in HANDLERS:
        if isinstance(exc, exc_type):
            return handler(exc)
    return unexpected_exception_handler(exc)


def with_exit_codes(command: Callable[..., int]) -> Callable[..., int]:
    @functools.wraps(command)
    def wrapper(*args, **kwargs) -> int:
        try:
            return command(*args, **kwargs)
        except Exception as exc:
            return handle_exception(exc)
    return wrapper
