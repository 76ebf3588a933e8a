from __future__ import annotations

import json
import logging
import sys
from typing import TextIO

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CERTIFICATE_FAILURE = 1
EXIT_BAD_INPUT = 2
EXIT_IO = 3


class AppError(Exception):
    def __init__(self, code: str, message: str, exit_code: int = EXIT_BAD_INPUT) -> None:
        self.code = code
        self.message = message
        self.exit_code = exit_code
        super().__init__(message)


class DomainError(AppError, ValueError):
    def __init__(self, message: str = "Argument outside the operation's domain.") -> None:
        super().__init__(code="domain_error", message=message)


class InvalidStateError(DomainError):
    def __init__(self, message: str = "Invalid opinion state.") -> None:
        super().__init__(message)
        self.code = "invalid_state"


class UnsupportedKernelError(AppError):
    def __init__(self, message: str = "Kernel not supported for this operation.") -> None:
        super().__init__(code="unsupported_kernel", message=message)


class UnsupportedCombinationError(AppError):
    def __init__(self, message: str = "Unsupported model combination.") -> None:
        super().__init__(code="unsupported_combination", message=message)


class ModelInvalidError(AppError):
    def __init__(self, message: str = "Influence model is invalid for this mode.") -> None:
        super().__init__(code="model_invalid", message=message)


class SingularityError(AppError):
    def __init__(self, message: str = "Coincident positions make the interaction singular.") -> None:
        super().__init__(code="singularity", message=message)


class ConfigError(AppError):
    def __init__(self, message: str = "Invalid configuration.") -> None:
        super().__init__(code="bad_config", message=message)


class StorageError(AppError):
    def __init__(self, message: str = "Could not read or write run files.") -> None:
        super().__init__(code="io_error", message=message, exit_code=EXIT_IO)


def app_error_handler(exc: AppError, stream: TextIO | None = None) -> int:
    out = stream or sys.stderr
    out.write(json.dumps({"error": exc.code, "message": exc.message}) + "\n")
    return exc.exit_code


def unhandled_error_handler(exc: Exception, stream: TextIO | None = None) -> int:
    logger.exception("Unhandled exception", exc_info=exc)
    out = stream or sys.stderr
    out.write(
        json.dumps(
            {
                "error": "internal_error",
                "message": "An unexpected error occurred.",
                "detail": str(exc),
            }
        )
        + "\n"
    )
    return EXIT_IO
