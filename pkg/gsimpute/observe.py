# SPDX-License-Identifier: MIT

"""
The masked one-bit observation model ``s_bar = m * sign(x)``.
"""

from __future__ import annotations

import struct

from pathlib import Path

import numpy as np

from attrs import cmp_using, field, frozen

from . import validators as gv
from .converters import to_int8_array
from .exceptions import (
    BadMagic,
    DimensionMismatch,
    InvalidEntry,
    InvalidProbability,
    TruncatedFile,
)


__all__ = [
    "Observation",
    "apply_mask",
    "infer_mask",
    "observe",
    "quantize",
    "read_observations",
    "sample_mask",
    "sample_masks",
    "write_observations",
]

OBS_MAGIC = b"GSOB1"
_OBS_HEADER = struct.Struct("<II")


@frozen
class Observation:
    """
    Mask and signed values of one realization (vectors of length ``N``), or
    of ``R`` realizations stacked as ``R x N`` matrices.

    ``signed`` is zero exactly where ``mask`` is zero and ``+-1`` elsewhere.
    """

    mask: np.ndarray = field(
        converter=to_int8_array,
        validator=gv.values_in((0, 1)),
        eq=cmp_using(eq=np.array_equal),
        hash=False,
    )
    signed: np.ndarray = field(
        converter=to_int8_array,
        validator=gv.values_in((-1, 0, 1)),
        eq=cmp_using(eq=np.array_equal),
        hash=False,
    )

    @signed.validator
    def _check_consistent(self, attribute, value):
        if value.shape != self.mask.shape:
            msg = f"'mask' has shape {self.mask.shape} but 'signed' has {value.shape}."
            raise DimensionMismatch(msg)
        if np.any((value != 0) != (self.mask == 1)):
            msg = "'signed' must be non-zero exactly where 'mask' is one."
            raise ValueError(msg, attribute, value)

    @property
    def n_nodes(self):
        return self.mask.shape[-1]

    def __len__(self):
        return 1 if self.mask.ndim == 1 else self.mask.shape[0]

    def __getitem__(self, idx):
        """
        Select realizations of a stacked observation.
        """
        if self.mask.ndim == 1:
            msg = "A single realization cannot be indexed."
            raise TypeError(msg)
        return Observation(self.mask[idx], self.signed[idx])


def quantize(x):
    """
    One-bit quantization ``sign(x)`` with ``sign(0) = +1``.
    """
    return np.where(np.asarray(x) >= 0, 1, -1).astype(np.int8)


def apply_mask(s, m):
    """
    Observe the signs *s* at the nodes where the mask *m* is one.

    Raises:
        gsimpute.exceptions.DimensionMismatch: If shapes differ.
    """
    s = np.asarray(s)
    m = np.asarray(m)
    if s.shape != m.shape:
        msg = f"Signs have shape {s.shape} but mask has {m.shape}."
        raise DimensionMismatch(msg)
    return Observation(m, m * s)


def observe(x, m):
    """
    Quantize then mask: the full observation model.
    """
    return apply_mask(quantize(x), m)


def _check_probability(p):
    if not 0 < p <= 1:
        msg = f"Observation probability must lie in (0, 1] (got {p!r})."
        raise InvalidProbability(msg)


def sample_mask(n, p_observe, rng_seed):
    """
    I.i.d. Bernoulli(*p_observe*) mask of length *n*, deterministic in
    *rng_seed*.
    """
    _check_probability(p_observe)
    rng = np.random.default_rng(rng_seed)
    return (rng.random(n) < p_observe).astype(np.int8)


def sample_masks(r, n, p_observe, base_seed):
    """
    ``r`` independent masks; row ``i`` is ``sample_mask(n, p, base_seed + i)``
    so that any subset of rows can be regenerated in isolation.
    """
    _check_probability(p_observe)
    return np.stack(
        [sample_mask(n, p_observe, base_seed + i) for i in range(r)]
    ).reshape(r, n)


def infer_mask(s_bar):
    """
    Recover the mask from signed observations: one where ``|s_bar| = 1``.

    Raises:
        gsimpute.exceptions.InvalidEntry:
            If an entry is not one of -1, 0, +1.
    """
    arr = np.asarray(s_bar)
    bad = ~np.isin(arr, (-1, 0, 1))
    if np.any(bad):
        msg = f"Signed observations must be -1, 0 or +1 (got {arr[bad][0]!r})."
        raise InvalidEntry(msg)
    return (np.abs(arr) == 1).astype(np.int8)


def write_observations(path, obs):
    """
    Write stacked observations as ``GSOB1``: magic, ``N`` and ``R`` as
    little-endian uint32, then ``R`` records of ``N`` signed bytes.
    """
    signed = np.atleast_2d(obs.signed)
    r, n = signed.shape
    with Path(path).open("wb") as f:
        f.write(OBS_MAGIC)
        f.write(_OBS_HEADER.pack(n, r))
        f.write(signed.astype("<i1").tobytes(order="C"))


def read_observations(path):
    """
    Read a ``GSOB1`` file back into a stacked `Observation`; the mask is
    inferred from the signs.

    Raises:
        gsimpute.exceptions.BadMagic: On a foreign file.
        gsimpute.exceptions.TruncatedFile: If records are missing.
    """
    raw = Path(path).read_bytes()
    if raw[: len(OBS_MAGIC)] != OBS_MAGIC:
        msg = f"{path}: not a GSOB1 observation file."
        raise BadMagic(msg)
    head_end = len(OBS_MAGIC) + _OBS_HEADER.size
    if len(raw) < head_end:
        msg = f"{path}: header is truncated."
        raise TruncatedFile(msg)
    n, r = _OBS_HEADER.unpack(raw[len(OBS_MAGIC) : head_end])
    if len(raw) < head_end + n * r:
        msg = f"{path}: expected {n * r} payload bytes, found {len(raw) - head_end}."
        raise TruncatedFile(msg)
    signed = np.frombuffer(raw, dtype="<i1", count=n * r, offset=head_end)
    signed = signed.reshape(r, n)
    return Observation(infer_mask(signed), signed)
