# SPDX-License-Identifier: MIT

"""
Synthetic graph signals, MNIST ingestion, normalization, error metrics and
dataset files.
"""

from __future__ import annotations

import gzip
import logging
import math
import struct

from pathlib import Path

import numpy as np

from attrs import cmp_using, field, frozen, validators
from sklearn.preprocessing import MinMaxScaler

from .converters import to_float_array
from .exceptions import (
    BadMagic,
    DegenerateRange,
    DimensionMismatch,
    EmptyIndexSet,
    InvalidDecay,
    InvalidK,
    TruncatedFile,
    UnsupportedType,
)
from .observe import Observation, observe, sample_masks


__all__ = [
    "Dataset",
    "Metrics",
    "Normalization",
    "batch_metrics",
    "denormalize",
    "gen_bandlimited",
    "gen_smooth",
    "load_idx",
    "load_mnist_images",
    "make_dataset",
    "metrics",
    "normalize",
    "pixel_features",
    "random_points",
    "read_ground_truth",
    "write_ground_truth",
    "write_idx",
]

logger = logging.getLogger(__name__)

TRUTH_MAGIC = b"GSGT1"
_TRUTH_HEADER = struct.Struct("<II")

_IDX_DIM = struct.Struct(">I")
_IDX_UBYTE = 0x08
# Element types defined by the IDX format that this reader does not decode.
_IDX_OTHER_TYPES = {
    0x09: "signed byte",
    0x0B: "short",
    0x0C: "int",
    0x0D: "float",
    0x0E: "double",
}
_GZIP_MAGIC = b"\x1f\x8b"


@frozen
class Normalization:
    """
    Affine map ``x' = x * scale + offset`` from raw units to the networks'
    value range.
    """

    scale: float = field(converter=float, validator=validators.gt(0))
    offset: float = field(converter=float)

    def apply(self, x):
        return np.asarray(x, dtype=np.float64) * self.scale + self.offset

    def invert(self, x):
        return (np.asarray(x, dtype=np.float64) - self.offset) / self.scale


@frozen
class Dataset:
    """
    ``R`` realizations: ground truth in raw units (absent for
    observation-only data), stacked observations and the normalization
    under which the observations were taken.
    """

    observations: Observation
    signals: np.ndarray | None = field(
        default=None,
        converter=lambda v: None if v is None else to_float_array(v),
        eq=cmp_using(eq=np.array_equal),
        hash=False,
    )
    normalization: Normalization | None = None

    @signals.validator
    def _check_signals(self, attribute, value):
        if value is not None and value.shape != self.observations.mask.shape:
            msg = (
                f"Signals have shape {value.shape} but observations have "
                f"{self.observations.mask.shape}."
            )
            raise DimensionMismatch(msg)

    @property
    def n_nodes(self):
        return self.observations.n_nodes

    def __len__(self):
        return len(self.observations)

    def normalized_signals(self):
        """
        Ground truth in the networks' units.
        """
        if self.normalization is None:
            return self.signals
        return self.normalization.apply(self.signals)


@frozen
class Metrics:
    rmse_observed: float
    rmse_missing: float
    rmse_all: float


def random_points(n, dim, rng_seed):
    """
    *n* points drawn uniformly from the unit cube of dimension *dim*.
    """
    return np.random.default_rng(rng_seed).random((n, dim))


def gen_smooth(sd, r, filter_decay, rng_seed):
    """
    Heat-kernel smooth signals ``V diag(exp(-decay * lambda)) V^T w`` with
    white Gaussian ``w``, each scaled to max-abs one.

    Raises:
        gsimpute.exceptions.InvalidDecay:
            If *filter_decay* is negative or not finite.
    """
    if not math.isfinite(filter_decay) or filter_decay < 0:
        msg = f"'filter_decay' must be finite and >= 0 (got {filter_decay!r})."
        raise InvalidDecay(msg)
    w = np.random.default_rng(rng_seed).standard_normal((r, sd.n_nodes))
    response = np.exp(-filter_decay * sd.eigenvalues)
    x = ((w @ sd.eigenvectors) * response) @ sd.eigenvectors.T
    peak = np.max(np.abs(x), axis=1, keepdims=True)
    return x / np.where(peak > 0, peak, 1.0)


def gen_bandlimited(sd, r, k, rng_seed):
    """
    Signals ``sum_{k' <= k} c_k' v_k'`` with standard normal coefficients.

    Raises:
        gsimpute.exceptions.InvalidK: Unless ``1 <= k <= N``.
    """
    if not isinstance(k, (int, np.integer)) or not 1 <= k <= sd.n_nodes:
        msg = f"K must be an integer in [1, {sd.n_nodes}] (got {k!r})."
        raise InvalidK(msg)
    c = np.random.default_rng(rng_seed).standard_normal((r, k))
    return c @ sd.eigenvectors[:, :k].T


def _read_maybe_gzip(path):
    raw = Path(path).read_bytes()
    if raw[:2] == _GZIP_MAGIC:
        return gzip.decompress(raw)
    return raw


def load_idx(path):
    """
    Parse an IDX file of unsigned bytes (``*.gz`` is decompressed
    transparently).

    The header is two zero bytes, the element type (``0x08``), the rank, then
    one big-endian uint32 per dimension; the row-major payload follows.

    Raises:
        gsimpute.exceptions.BadMagic: If the header is not IDX.

        gsimpute.exceptions.UnsupportedType:
            For IDX element types other than unsigned byte.

        gsimpute.exceptions.TruncatedFile:
            If the payload is shorter than the dimensions claim.
    """
    raw = _read_maybe_gzip(path)
    if len(raw) < 4 or raw[0] != 0 or raw[1] != 0 or raw[3] == 0:
        msg = f"{path}: not an IDX file (magic {raw[:4].hex()})."
        raise BadMagic(msg)
    dtype, rank = raw[2], raw[3]
    if dtype in _IDX_OTHER_TYPES:
        msg = f"{path}: IDX element type {_IDX_OTHER_TYPES[dtype]} is not supported."
        raise UnsupportedType(msg)
    if dtype != _IDX_UBYTE:
        msg = f"{path}: unknown IDX element type 0x{dtype:02x}."
        raise BadMagic(msg)

    head_end = 4 + rank * _IDX_DIM.size
    if len(raw) < head_end:
        msg = f"{path}: header declares {rank} dimensions but is truncated."
        raise TruncatedFile(msg)
    dims = tuple(_IDX_DIM.unpack_from(raw, 4 + i * _IDX_DIM.size)[0] for i in range(rank))
    count = math.prod(dims)
    if len(raw) - head_end < count:
        msg = f"{path}: expected {count} payload bytes, found {len(raw) - head_end}."
        raise TruncatedFile(msg)
    if len(raw) - head_end > count:
        logger.warning("%s: ignoring %d trailing bytes.", path, len(raw) - head_end - count)
    return np.frombuffer(raw, dtype=np.uint8, count=count, offset=head_end).reshape(dims)


def write_idx(path, arr):
    """
    Serialize a ``uint8`` array as IDX; gzip-compressed if *path* ends in
    ``.gz``.

    Raises:
        gsimpute.exceptions.UnsupportedType: For any other dtype.
    """
    arr = np.asarray(arr)
    if arr.dtype != np.uint8:
        msg = f"Only uint8 arrays can be written as IDX (got {arr.dtype})."
        raise UnsupportedType(msg)
    if arr.ndim == 0 or arr.ndim > 255:
        msg = f"IDX rank must be in [1, 255] (got {arr.ndim})."
        raise UnsupportedType(msg)
    payload = b"".join(
        [
            bytes((0, 0, _IDX_UBYTE, arr.ndim)),
            *(_IDX_DIM.pack(d) for d in arr.shape),
            np.ascontiguousarray(arr).tobytes(),
        ]
    )
    path = Path(path)
    # No name or timestamp in the gzip header: equal arrays give equal bytes.
    path.write_bytes(gzip.compress(payload, mtime=0) if path.suffix == ".gz" else payload)


def load_mnist_images(path, limit=None):
    """
    MNIST images flattened to ``R x 784`` rows with pixels scaled to
    ``[0, 1]``, optionally the first *limit* only.
    """
    images = load_idx(path)
    if images.ndim != 3:
        msg = f"{path}: expected rank-3 image data, found rank {images.ndim}."
        raise UnsupportedType(msg)
    if limit is not None:
        images = images[:limit]
    return images.reshape(len(images), -1).astype(np.float64) / 255.0


def pixel_features(images, subsample, rng_seed):
    """
    Per-pixel feature vectors for the pixel graph: pixel ``i`` is described
    by its values across *subsample* randomly chosen training images.

    Returns:
        numpy.ndarray: ``n_pixels x min(subsample, R)``.
    """
    images = np.asarray(images, dtype=np.float64)
    take = min(subsample, len(images))
    rows = np.random.default_rng(rng_seed).choice(len(images), size=take, replace=False)
    return images[np.sort(rows)].T


def normalize(signals, target=(-1.0, 1.0)):
    """
    Map *signals* affinely onto *target* using the dataset-global minimum
    and maximum.

    Returns:
        tuple[numpy.ndarray, Normalization]: The mapped signals and the map.

    Raises:
        gsimpute.exceptions.DegenerateRange: If all values are equal.
    """
    values = np.asarray(signals, dtype=np.float64)
    lo, hi = float(np.min(values)), float(np.max(values))
    if hi == lo:
        msg = f"Cannot normalize: every value equals {lo!r}."
        raise DegenerateRange(msg)
    scaler = MinMaxScaler(feature_range=target).fit(values.reshape(-1, 1))
    norm = Normalization(scaler.scale_[0], scaler.min_[0])
    return norm.apply(values), norm


def denormalize(signals, norm):
    return norm.invert(signals)


def make_dataset(signals, p_observe, mask_seed, normalization=None):
    """
    Observe raw *signals* under Bernoulli(*p_observe*) masks.

    Signs are taken after normalization. Without a *normalization* one is
    fitted on *signals* (the training split); pass the training split's
    record when building the test split.
    """
    signals = np.atleast_2d(np.asarray(signals, dtype=np.float64))
    if normalization is None:
        _, normalization = normalize(signals)
    r, n = signals.shape
    masks = sample_masks(r, n, p_observe, mask_seed)
    obs = observe(normalization.apply(signals), masks)
    return Dataset(obs, signals, normalization)


def _rmse(diff, sel):
    return math.sqrt(float(np.sum(diff[sel] ** 2)) / int(np.sum(sel)))


def metrics(x_hat, x, m):
    """
    Root-mean-squared error over the observed nodes, the missing nodes and
    all nodes.

    Raises:
        gsimpute.exceptions.DimensionMismatch: If shapes differ.

        gsimpute.exceptions.EmptyIndexSet:
            If no node is observed or no node is missing.
    """
    x_hat, x, m = _check_metric_args(x_hat, x, m)
    if x.ndim != 1:
        msg = "'metrics' takes single signals; use 'batch_metrics' for stacks."
        raise DimensionMismatch(msg)
    observed = m == 1
    if observed.all() or not observed.any():
        which = "missing" if observed.all() else "observed"
        msg = f"No {which} node to average over."
        raise EmptyIndexSet(msg)
    diff = x_hat - x
    return Metrics(_rmse(diff, observed), _rmse(diff, ~observed), _rmse(diff, np.ones_like(observed)))


def _check_metric_args(x_hat, x, m):
    x_hat = np.asarray(x_hat, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    m = np.asarray(m)
    if not x_hat.shape == x.shape == m.shape:
        msg = f"Shapes differ: x_hat {x_hat.shape}, x {x.shape}, mask {m.shape}."
        raise DimensionMismatch(msg)
    return x_hat, x, m


def _row_rmse(sq, sel):
    counts = sel.sum(axis=-1)
    sums = np.where(sel, sq, 0.0).sum(axis=-1)
    ok = counts > 0
    if not ok.any():
        return math.nan
    return float(np.mean(np.sqrt(sums[ok] / counts[ok])))


def batch_metrics(x_hat, x, m):
    """
    Per-realization errors averaged over the rows of ``R x N`` stacks.

    Rows whose index set is empty are left out of that average; a set that
    is empty in every row yields NaN.
    """
    x_hat, x, m = _check_metric_args(x_hat, x, m)
    x_hat, x, m = np.atleast_2d(x_hat), np.atleast_2d(x), np.atleast_2d(m)
    sq = (x_hat - x) ** 2
    observed = m == 1
    return Metrics(
        _row_rmse(sq, observed),
        _row_rmse(sq, ~observed),
        _row_rmse(sq, np.ones_like(observed)),
    )


def write_ground_truth(path, signals):
    """
    Write ``R x N`` signals as ``GSGT1``: magic, ``N`` and ``R`` as
    little-endian uint32, then the float64 little-endian values row by row.
    """
    arr = np.atleast_2d(np.asarray(signals, dtype=np.float64))
    r, n = arr.shape
    with Path(path).open("wb") as f:
        f.write(TRUTH_MAGIC)
        f.write(_TRUTH_HEADER.pack(n, r))
        f.write(arr.astype("<f8").tobytes(order="C"))


def read_ground_truth(path):
    """
    Read a ``GSGT1`` file into an ``R x N`` array.

    Raises:
        gsimpute.exceptions.BadMagic: On a foreign file.
        gsimpute.exceptions.TruncatedFile: If values are missing.
    """
    raw = Path(path).read_bytes()
    if raw[: len(TRUTH_MAGIC)] != TRUTH_MAGIC:
        msg = f"{path}: not a GSGT1 ground-truth file."
        raise BadMagic(msg)
    head_end = len(TRUTH_MAGIC) + _TRUTH_HEADER.size
    if len(raw) < head_end:
        msg = f"{path}: header is truncated."
        raise TruncatedFile(msg)
    n, r = _TRUTH_HEADER.unpack(raw[len(TRUTH_MAGIC) : head_end])
    if len(raw) < head_end + 8 * n * r:
        msg = f"{path}: expected {8 * n * r} payload bytes, found {len(raw) - head_end}."
        raise TruncatedFile(msg)
    values = np.frombuffer(raw, dtype="<f8", count=n * r, offset=head_end)
    return values.reshape(r, n).astype(np.float64)
