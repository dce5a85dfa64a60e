# SPDX-License-Identifier: MIT

"""
Validators for array-valued *attrs* fields.

They follow the calling convention of `attrs.validators`:
``validator(instance, attribute, value)``, and complement the stock ones
(`attrs.validators.gt`, `attrs.validators.in_`, ...) with checks that only
make sense for `numpy` arrays.
"""

from __future__ import annotations

import numpy as np

from attrs import define, field

from .exceptions import InvalidProbability, NotSymmetric


__all__ = [
    "finite",
    "integer",
    "nonnegative",
    "square",
    "symmetric",
    "unit_interval",
    "values_in",
    "zero_diagonal",
]


@define(repr=False, frozen=True, slots=True)
class _FiniteValidator:
    def __call__(self, inst, attr, value):
        """
        We use a callable class to be able to change the ``__repr__``.
        """
        if not np.all(np.isfinite(value)):
            msg = f"'{attr.name}' must only hold finite values."
            raise ValueError(msg, attr, value)

    def __repr__(self):
        return "<finite validator>"


def finite():
    """
    A validator that raises a `ValueError` if the array holds a NaN or an
    infinity.
    """
    return _FiniteValidator()


@define(repr=False, frozen=True, slots=True)
class _NonNegativeValidator:
    def __call__(self, inst, attr, value):
        if np.any(value < 0):
            msg = f"'{attr.name}' must be non-negative (min is {np.min(value)!r})."
            raise ValueError(msg, attr, value)

    def __repr__(self):
        return "<nonnegative validator>"


def nonnegative():
    """
    A validator that raises a `ValueError` if any entry is negative.
    """
    return _NonNegativeValidator()


@define(repr=False, frozen=True, slots=True)
class _SquareValidator:
    def __call__(self, inst, attr, value):
        if value.ndim != 2 or value.shape[0] != value.shape[1]:
            msg = f"'{attr.name}' must be a square matrix (got shape {value.shape})."
            raise ValueError(msg, attr, value)

    def __repr__(self):
        return "<square validator>"


def square():
    """
    A validator that raises a `ValueError` unless the array is a square
    matrix.
    """
    return _SquareValidator()


@define(repr=False, frozen=True, slots=True)
class _SymmetricValidator:
    tol: float = field()

    def __call__(self, inst, attr, value):
        dev = float(np.max(np.abs(value - value.T))) if value.size else 0.0
        if dev > self.tol:
            msg = (
                f"'{attr.name}' must be symmetric within {self.tol!r} "
                f"(max deviation {dev!r})."
            )
            raise NotSymmetric(msg)

    def __repr__(self):
        return f"<symmetric validator with tolerance {self.tol!r}>"


def symmetric(tol=1e-10):
    """
    A validator that raises `gsimpute.exceptions.NotSymmetric` if the
    largest entry of ``|M - M.T|`` exceeds *tol*.

    Args:
        tol (float): Largest admissible absolute asymmetry.
    """
    return _SymmetricValidator(tol)


@define(repr=False, frozen=True, slots=True)
class _ZeroDiagonalValidator:
    def __call__(self, inst, attr, value):
        if np.any(np.diag(value) != 0):
            msg = f"'{attr.name}' must have a zero diagonal (no self-loops)."
            raise ValueError(msg, attr, value)

    def __repr__(self):
        return "<zero_diagonal validator>"


def zero_diagonal():
    """
    A validator that raises a `ValueError` if a matrix has a non-zero
    diagonal entry.
    """
    return _ZeroDiagonalValidator()


@define(repr=False, frozen=True, slots=True)
class _ValuesInValidator:
    options: tuple = field()

    def __call__(self, inst, attr, value):
        bad = ~np.isin(value, self.options)
        if np.any(bad):
            offending = np.asarray(value)[bad][0]
            msg = f"'{attr.name}' entries must be in {self.options!r} (got {offending!r})."
            raise ValueError(msg, attr, self.options, value)

    def __repr__(self):
        return f"<values_in validator with options {self.options!r}>"


def values_in(options):
    """
    A validator that raises a `ValueError` if an array entry does not belong
    to *options*.

    Args:
        options: Allowed entry values, any iterable.
    """
    return _ValuesInValidator(tuple(options))


@define(repr=False, frozen=True, slots=True)
class _UnitIntervalValidator:
    open_left: bool = field()

    def __call__(self, inst, attr, value):
        low_ok = value > 0 if self.open_left else value >= 0
        if not (low_ok and value <= 1):
            bracket = "(" if self.open_left else "["
            msg = f"'{attr.name}' must lie in {bracket}0, 1] (got {value!r})."
            raise InvalidProbability(msg)

    def __repr__(self):
        return f"<unit_interval validator, open_left={self.open_left!r}>"


def unit_interval(open_left=False):
    """
    A validator that raises `gsimpute.exceptions.InvalidProbability` unless
    the value lies in ``[0, 1]``, or ``(0, 1]`` with *open_left*.
    """
    return _UnitIntervalValidator(open_left)


@define(repr=False, frozen=True, slots=True)
class _IntegerValidator:
    def __call__(self, inst, attr, value):
        if isinstance(value, bool) or not isinstance(value, int):
            msg = f"'{attr.name}' must be an integer (got {value!r})."
            raise TypeError(msg, attr, value)

    def __repr__(self):
        return "<integer validator>"


def integer():
    """
    A validator that raises a `TypeError` unless the value is an `int`.

    Unlike ``attrs.validators.instance_of(int)`` it rejects `bool`, so a
    JSON ``true`` never passes for a count.
    """
    return _IntegerValidator()
