from functools import wraps

import numpy as np
from django.core.management.base import CommandError
from pydantic import ValidationError

from .exceptions import EstimationFailure, LabError

USAGE_ERROR = 1
DATA_ERROR = 2
NUMERICAL_ERROR = 3


def is_numerical_failure(exc):
    return isinstance(exc, (EstimationFailure, np.linalg.LinAlgError, FloatingPointError))


def lab_command(handle):
    """Turn lab exceptions raised by a command's handle() into exit codes."""

    @wraps(handle)
    def wrapper(self, *args, **options):
        try:
            return handle(self, *args, **options)
        except CommandError:
            raise
        except Exception as exc:
            if is_numerical_failure(exc):
                raise CommandError(f"numerical failure: {exc}", returncode=NUMERICAL_ERROR) from exc
            if isinstance(exc, LabError):
                raise CommandError(str(exc), returncode=DATA_ERROR) from exc
            if isinstance(exc, OSError):
                raise CommandError(f"{exc.filename or ''}: {exc.strerror}", returncode=DATA_ERROR) from exc
            if isinstance(exc, ValidationError):
                # built from command-line flags, so a usage problem
                raise CommandError(str(exc), returncode=USAGE_ERROR) from exc
            raise

    return wrapper
