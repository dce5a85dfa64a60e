# SPDX-License-Identifier: MIT

"""
Fixtures shared by several test modules: small graphs and a
finite-difference oracle.
"""

import numpy as np

from gsimpute.graph import Graph


def path_graph(n):
    adj = np.zeros((n, n))
    idx = np.arange(n - 1)
    adj[idx, idx + 1] = adj[idx + 1, idx] = 1.0
    return Graph(adj)


def complete_graph(n):
    return Graph(np.ones((n, n)) - np.eye(n))


def numeric_grad(f, x, h=1e-5):
    """
    Central finite differences of the scalar function *f* with respect to
    the array *x*, which is perturbed in place and restored.
    """
    grad = np.zeros_like(x)
    flat, gflat = x.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        up = f()
        flat[i] = old - h
        down = f()
        flat[i] = old
        gflat[i] = (up - down) / (2 * h)
    return grad


def rel_err(a, b, floor=1e-8):
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    scale = max(float(np.linalg.norm(a)), float(np.linalg.norm(b)), floor)
    return float(np.linalg.norm(a - b)) / scale
