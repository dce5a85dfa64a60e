# SPDX-License-Identifier: MIT

"""
Graph-signal regularizers and the graph Fourier transform.

All functions accept a single signal of length ``N`` or a batch shaped
``B x N`` (one signal per row); regularizers then return one value per row.
"""

from __future__ import annotations

import numpy as np

from .exceptions import DimensionMismatch, InvalidK
from .graph import laplacian


__all__ = [
    "bl_energy",
    "bl_energy_grad",
    "gft",
    "inverse_gft",
    "tv_l0",
    "tv_l1",
    "tv_l1_subgrad",
    "tv_l2",
    "tv_l2_edge_sum",
    "tv_l2_grad",
]


def _signal(x, n, what="x"):
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim not in (1, 2) or arr.shape[-1] != n:
        msg = f"'{what}' has shape {arr.shape}, expected ({n},) or (B, {n})."
        raise DimensionMismatch(msg)
    return arr


def _edge_arrays(g):
    rows, cols = np.nonzero(np.triu(g.adjacency, 1))
    return rows, cols, g.adjacency[rows, cols]


def tv_l2(g, x):
    """
    Quadratic total variation ``x^T L x``.
    """
    x = _signal(x, g.n_nodes)
    lap = laplacian(g)
    return np.sum((x @ lap) * x, axis=-1)


def tv_l2_edge_sum(g, x):
    """
    Quadratic total variation as the explicit edge sum
    ``sum_{(i,j)} A_ij (x_i - x_j)^2``; agrees with `tv_l2`.
    """
    x = _signal(x, g.n_nodes)
    rows, cols, w = _edge_arrays(g)
    return np.sum(w * (x[..., rows] - x[..., cols]) ** 2, axis=-1)


def tv_l2_grad(g, x):
    """
    Gradient ``2 L x`` of `tv_l2`.
    """
    x = _signal(x, g.n_nodes)
    return 2.0 * x @ laplacian(g)


def tv_l1(g, x):
    """
    ``sum_{(i,j)} A_ij |x_i - x_j|``.
    """
    x = _signal(x, g.n_nodes)
    rows, cols, w = _edge_arrays(g)
    return np.sum(w * np.abs(x[..., rows] - x[..., cols]), axis=-1)


def tv_l1_subgrad(g, x):
    """
    A subgradient of `tv_l1`, taking ``sign(0) = 0`` on tied edges.
    """
    x = _signal(x, g.n_nodes)
    rows, cols, w = _edge_arrays(g)
    contrib = w * np.sign(x[..., rows] - x[..., cols])
    out = np.zeros_like(x)
    if x.ndim == 1:
        np.add.at(out, rows, contrib)
        np.add.at(out, cols, -contrib)
    else:
        np.add.at(out, (slice(None), rows), contrib)
        np.add.at(out, (slice(None), cols), -contrib)
    return out


def tv_l0(g, x, tol=1e-9):
    """
    Weighted count of edges whose endpoint values differ by more than *tol*.

    Exact inequality is meaningless in floating point; *tol* stands in for
    it. The count is piecewise constant, so it has no useful gradient.
    """
    if tol < 0:
        msg = f"'tol' must be non-negative (got {tol!r})."
        raise ValueError(msg)
    x = _signal(x, g.n_nodes)
    rows, cols, w = _edge_arrays(g)
    return np.sum(w * (np.abs(x[..., rows] - x[..., cols]) > tol), axis=-1)


def gft(sd, x):
    """
    Graph Fourier transform ``V^T x``.
    """
    x = _signal(x, sd.n_nodes)
    return x @ sd.eigenvectors


def inverse_gft(sd, x_tilde):
    """
    Inverse transform ``V x~``.
    """
    xt = _signal(x_tilde, sd.n_nodes, "x_tilde")
    return xt @ sd.eigenvectors.T


def _check_bandwidth(sd, k):
    if not isinstance(k, (int, np.integer)) or not 0 <= k <= sd.n_nodes:
        msg = f"K must be an integer in [0, {sd.n_nodes}] (got {k!r})."
        raise InvalidK(msg)


def bl_energy(sd, x, k):
    """
    Energy of *x* above frequency *k*: ``||[v_{k+1}, ..., v_N]^T x||^2``.
    """
    _check_bandwidth(sd, k)
    x = _signal(x, sd.n_nodes)
    high = x @ sd.eigenvectors[:, k:]
    return np.sum(high**2, axis=-1)


def bl_energy_grad(sd, x, k):
    """
    Gradient ``2 V_{>k} V_{>k}^T x`` of `bl_energy`.
    """
    _check_bandwidth(sd, k)
    x = _signal(x, sd.n_nodes)
    v_high = sd.eigenvectors[:, k:]
    return 2.0 * (x @ v_high) @ v_high.T
