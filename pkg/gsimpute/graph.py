# SPDX-License-Identifier: MIT

"""
Undirected weighted graphs, their Laplacians and spectral decompositions.

Everything is stored densely: the graphs this package works with have at
most a few hundred nodes (784 for the MNIST pixel graph).
"""

from __future__ import annotations

import logging
import math

from pathlib import Path
from typing import Literal

import numpy as np

from attrs import cmp_using, field, frozen

from . import validators as gv
from .converters import to_float_array
from .exceptions import (
    DatasetFormatError,
    DuplicatePoints,
    InvalidK,
    NoConvergence,
    NotSymmetric,
)


__all__ = [
    "Graph",
    "SpectralDecomposition",
    "connected_components",
    "degree",
    "edges",
    "knn_graph",
    "laplacian",
    "read_edge_list",
    "spectral_basis",
    "spectral_decompose",
    "write_edge_list",
]

logger = logging.getLogger(__name__)

Weighting = Literal["binary", "inverse_distance"]
Shift = Literal["laplacian", "adjacency"]
Eigensolver = Literal["jacobi", "lapack"]

# Scratch memory for one block of pairwise differences, in float64 entries.
_DIFF_BLOCK_ENTRIES = 4_000_000


@frozen
class Graph:
    """
    An undirected graph given by its symmetric, non-negative adjacency
    matrix with a zero diagonal. Edges are the non-zero entries.
    """

    adjacency: np.ndarray = field(
        converter=to_float_array,
        validator=[
            gv.square(),
            gv.finite(),
            gv.symmetric(0.0),
            gv.zero_diagonal(),
            gv.nonnegative(),
        ],
        eq=cmp_using(eq=np.array_equal),
        hash=False,
    )

    @property
    def n_nodes(self):
        return self.adjacency.shape[0]

    @property
    def n_edges(self):
        return int(np.count_nonzero(np.triu(self.adjacency, 1)))


@frozen
class SpectralDecomposition:
    """
    Eigenvalues (ascending) and the orthonormal eigenvectors of a symmetric
    graph matrix; column ``k`` of *eigenvectors* belongs to
    ``eigenvalues[k]``.

    The eigenvector matrix is the graph Fourier basis: the transform of a
    signal ``x`` is ``eigenvectors.T @ x``.
    """

    eigenvalues: np.ndarray = field(
        converter=to_float_array,
        validator=gv.finite(),
        eq=cmp_using(eq=np.array_equal),
        hash=False,
    )
    eigenvectors: np.ndarray = field(
        converter=to_float_array,
        validator=[gv.square(), gv.finite()],
        eq=cmp_using(eq=np.array_equal),
        hash=False,
    )

    @eigenvectors.validator
    def _check_dims(self, attribute, value):
        if value.shape[0] != self.eigenvalues.shape[0]:
            msg = (
                f"'{attribute.name}' is {value.shape[0]}x{value.shape[1]} but "
                f"there are {self.eigenvalues.shape[0]} eigenvalues."
            )
            raise ValueError(msg)

    @property
    def n_nodes(self):
        return self.eigenvalues.shape[0]


def degree(g):
    """
    Weighted degree vector ``A 1``.
    """
    return g.adjacency.sum(axis=1)


def laplacian(g):
    """
    Combinatorial Laplacian ``L = D - A`` with ``D = diag(A 1)``.
    """
    lap = -np.array(g.adjacency)
    lap[np.diag_indices_from(lap)] = degree(g)
    return lap


def edges(g):
    """
    Return the edge list as ``(i, j, w)`` triples with ``i < j``, ordered by
    ``i`` then ``j``.
    """
    rows, cols = np.nonzero(np.triu(g.adjacency, 1))
    return [
        (int(i), int(j), float(g.adjacency[i, j])) for i, j in zip(rows, cols)
    ]


def connected_components(g):
    """
    Label the connected components of *g* with union-find.

    Returns:
        numpy.ndarray: Component label per node, labels numbered ``0..C-1``
        in order of first appearance.
    """
    parent = list(range(g.n_nodes))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j, _ in edges(g):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)

    labels = np.empty(g.n_nodes, dtype=np.int64)
    seen = {}
    for i in range(g.n_nodes):
        labels[i] = seen.setdefault(find(i), len(seen))
    return labels


def _pairwise_sq_distances(points):
    n, f = points.shape
    out = np.empty((n, n))
    block = max(1, _DIFF_BLOCK_ENTRIES // max(1, n * f))
    for start in range(0, n, block):
        diff = points[start : start + block, None, :] - points[None, :, :]
        out[start : start + block] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


def knn_graph(points, k, weighting="binary"):
    """
    Connect every node to its *k* nearest neighbors in Euclidean distance
    over its feature vector, then symmetrize with ``A = max(A, A.T)``.

    Distance ties are broken by ascending node index, so the result is
    deterministic.

    Args:
        points (numpy.ndarray): ``N x F`` feature matrix, one row per node.

        k (int): Neighbors per node, ``1 <= k < N``.

        weighting (str):
            ``"binary"`` for unit weights or ``"inverse_distance"`` for
            ``1 / d_ij``.

    Raises:
        gsimpute.exceptions.InvalidK: If *k* is not in ``[1, N)``.

        gsimpute.exceptions.DuplicatePoints:
            If two nodes selected as neighbors have identical features under
            ``"inverse_distance"`` weighting (their weight would be
            infinite).
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2:
        msg = f"'points' must be an N x F matrix (got shape {pts.shape})."
        raise ValueError(msg)
    n = pts.shape[0]
    if not isinstance(k, (int, np.integer)) or not 1 <= k < n:
        msg = f"k must be an integer in [1, {n}) for {n} nodes (got {k!r})."
        raise InvalidK(msg)
    if weighting not in ("binary", "inverse_distance"):
        msg = f"'weighting' must be 'binary' or 'inverse_distance' (got {weighting!r})."
        raise ValueError(msg)

    d2 = _pairwise_sq_distances(pts)
    d2[np.diag_indices(n)] = np.inf
    neighbors = np.argsort(d2, axis=1, kind="stable")[:, :k]
    rows = np.repeat(np.arange(n), k)
    cols = neighbors.ravel()

    adj = np.zeros((n, n))
    if weighting == "binary":
        adj[rows, cols] = 1.0
    else:
        dist = np.sqrt(d2[rows, cols])
        if np.any(dist == 0):
            i = int(rows[np.argmax(dist == 0)])
            msg = f"Node {i} has a duplicate among its neighbors; inverse-distance weight is infinite."
            raise DuplicatePoints(msg)
        adj[rows, cols] = 1.0 / dist

    adj = np.maximum(adj, adj.T)
    logger.debug("Built %d-NN graph over %d nodes with %d edges.", k, n, np.count_nonzero(np.triu(adj, 1)))
    return Graph(adj)


def _jacobi(m, tol, max_sweeps):
    a = np.array(m, dtype=np.float64)
    n = a.shape[0]
    v = np.eye(n)
    scale = max(1.0, float(np.linalg.norm(a)))

    for sweep in range(max_sweeps + 1):
        off = float(np.linalg.norm(a - np.diag(np.diag(a))))
        if off < tol * scale:
            logger.debug("Jacobi converged after %d sweeps (off-diagonal %.3e).", sweep, off)
            return np.diag(a).copy(), v
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c

                col_p = a[:, p].copy()
                col_q = a[:, q]
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :]
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0

                vec_p = v[:, p].copy()
                vec_q = v[:, q]
                v[:, p] = c * vec_p - s * vec_q
                v[:, q] = s * vec_p + c * vec_q

    msg = f"Jacobi eigensolver did not converge within {max_sweeps} sweeps (off-diagonal norm {off:.3e})."
    raise NoConvergence(msg)


def spectral_decompose(m, *, tol=1e-10, max_sweeps=100, method="jacobi"):
    """
    Eigendecomposition of a symmetric matrix.

    The default solver runs cyclic Jacobi rotations until the Frobenius norm
    of the off-diagonal part drops below ``tol * max(1, ||M||_F)``.
    ``method="lapack"`` hands the matrix to `numpy.linalg.eigh` instead,
    which is the practical choice for graphs with many hundreds of nodes.

    Raises:
        gsimpute.exceptions.NotSymmetric:
            If ``|M - M.T|`` exceeds ``1e-10`` anywhere.

        gsimpute.exceptions.NoConvergence:
            If Jacobi needs more than *max_sweeps* sweeps.
    """
    mat = np.asarray(m, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        msg = f"Expected a square matrix (got shape {mat.shape})."
        raise ValueError(msg)
    dev = float(np.max(np.abs(mat - mat.T))) if mat.size else 0.0
    if dev > 1e-10:
        msg = f"Matrix is not symmetric (max deviation {dev:.3e})."
        raise NotSymmetric(msg)
    mat = 0.5 * (mat + mat.T)

    if method == "jacobi":
        vals, vecs = _jacobi(mat, tol, max_sweeps)
    elif method == "lapack":
        vals, vecs = np.linalg.eigh(mat)
    else:
        msg = f"'method' must be 'jacobi' or 'lapack' (got {method!r})."
        raise ValueError(msg)

    order = np.argsort(vals, kind="stable")
    return SpectralDecomposition(vals[order], vecs[:, order])


def spectral_basis(g, shift="laplacian", method="jacobi"):
    """
    Graph Fourier basis of *g*, from its Laplacian (default) or its
    adjacency matrix.
    """
    if shift == "laplacian":
        mat = laplacian(g)
    elif shift == "adjacency":
        mat = g.adjacency
    else:
        msg = f"'shift' must be 'laplacian' or 'adjacency' (got {shift!r})."
        raise ValueError(msg)
    return spectral_decompose(mat, method=method)


def write_edge_list(g, path):
    """
    Write *g* as a header line ``N <n_nodes>`` followed by one ``i j w`` line
    per edge (0-based, ``i < j``).
    """
    lines = [f"N {g.n_nodes}"]
    lines.extend(f"{i} {j} {w!r}" for i, j, w in edges(g))
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def read_edge_list(path):
    """
    Read a graph written by `write_edge_list`.

    Raises:
        gsimpute.exceptions.DatasetFormatError: On a malformed file.
    """
    text = Path(path).read_text(encoding="ascii").split("\n")
    lines = [ln.strip() for ln in text if ln.strip()]
    if not lines:
        msg = f"{path}: empty edge-list file."
        raise DatasetFormatError(msg)
    head = lines[0].split()
    if len(head) != 2 or head[0] != "N" or not head[1].isdigit():
        msg = f"{path}: header must be 'N <n_nodes>' (got {lines[0]!r})."
        raise DatasetFormatError(msg)
    n = int(head[1])
    adj = np.zeros((n, n))
    for lineno, ln in enumerate(lines[1:], start=2):
        parts = ln.split()
        try:
            i, j, w = int(parts[0]), int(parts[1]), float(parts[2])
        except (IndexError, ValueError):
            msg = f"{path}:{lineno}: expected 'i j w' (got {ln!r})."
            raise DatasetFormatError(msg) from None
        if len(parts) != 3 or not (0 <= i < n and 0 <= j < n) or i == j or w < 0:
            msg = f"{path}:{lineno}: invalid edge {ln!r}."
            raise DatasetFormatError(msg)
        adj[i, j] = adj[j, i] = w
    return Graph(adj)
