# SPDX-License-Identifier: MIT

"""
Process-wide runtime settings.
"""

import os

from .exceptions import ConfigError


__all__ = ["get_threads", "set_threads"]

_ENV_THREADS = "GSI_THREADS"


def _threads_from_env():
    raw = os.environ.get(_ENV_THREADS)
    if raw is None or not raw.strip():
        return os.cpu_count() or 1
    reason = f"must be a positive integer (got {raw!r})"
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(_ENV_THREADS, reason) from None
    if n < 1:
        raise ConfigError(_ENV_THREADS, reason)
    return n


_threads = None


def set_threads(n):
    """
    Cap the number of worker threads used to run independent experiment
    jobs. Pass `None` to go back to the ``GSI_THREADS`` environment variable
    (or the CPU count when it is unset).
    """
    if n is not None and (not isinstance(n, int) or isinstance(n, bool) or n < 1):
        msg = "'n' must be a positive int or None."
        raise TypeError(msg)
    global _threads
    _threads = n


def get_threads():
    """
    Return the current worker cap.
    """
    if _threads is not None:
        return _threads
    return _threads_from_env()
