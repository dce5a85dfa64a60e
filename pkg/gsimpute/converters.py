# SPDX-License-Identifier: MIT

"""
Converters for *attrs* fields and loosely typed configuration values.
"""

from __future__ import annotations

import numpy as np


__all__ = [
    "to_bool",
    "to_float_array",
    "to_int8_array",
    "to_int_tuple",
]


def to_float_array(val):
    """
    Convert *val* into a read-only ``float64`` `numpy.ndarray`.

    Domain objects are immutable; locking the buffer keeps callers from
    mutating a frozen instance behind its back.
    """
    arr = np.array(val, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


def to_int8_array(val):
    """
    Convert *val* into a read-only ``int8`` `numpy.ndarray`.

    Raises:
        ValueError: If a value is not integral.
    """
    raw = np.asarray(val)
    if raw.dtype.kind == "f" and np.any(raw != np.round(raw)):
        msg = "Signed observations must be integral."
        raise ValueError(msg)
    arr = np.array(raw, dtype=np.int8, copy=True)
    arr.setflags(write=False)
    return arr


def to_int_tuple(val):
    """
    Convert a JSON list of widths into a tuple of ints.

    Booleans are rejected with a `TypeError` rather than read as 0 or 1.
    """
    items = (val,) if isinstance(val, (int, np.integer)) else tuple(val)
    if any(isinstance(v, (bool, np.bool_)) for v in items):
        msg = f"Expected integers, got {val!r}."
        raise TypeError(msg)
    return tuple(int(v) for v in items)


def to_bool(val):
    """
    Convert "boolean" strings (for example, from environment variables or a
    hand-written JSON file) to real booleans.

    Values mapping to `True`:

    - ``True``
    - ``"true"`` / ``"t"``
    - ``"yes"`` / ``"y"``
    - ``"on"``
    - ``"1"``
    - ``1``

    Values mapping to `False`:

    - ``False``
    - ``"false"`` / ``"f"``
    - ``"no"`` / ``"n"``
    - ``"off"``
    - ``"0"``
    - ``0``

    Raises:
        ValueError: For any other value.
    """
    if isinstance(val, str):
        val = val.strip().lower()

    if val in (True, "true", "t", "yes", "y", "on", "1", 1):
        return True
    if val in (False, "false", "f", "no", "n", "off", "0", 0):
        return False

    msg = f"Cannot convert value to bool: {val!r}"
    raise ValueError(msg)
