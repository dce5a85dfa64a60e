# SPDX-License-Identifier: MIT

"""
Gradient-descent baseline: minimize

    J(x) = ||s_bar - m * tanh(x)||^2 + beta * x^T L x

from ``x = 0`` with a fixed step size and a fixed number of iterations,
``tanh`` standing in for ``sign``.
"""

from __future__ import annotations

import csv
import logging
import math

from pathlib import Path

import numpy as np

from attrs import field, frozen, validators

from . import validators as gv
from .data import batch_metrics
from .exceptions import DimensionMismatch, DivergedLoss
from .signals import tv_l2, tv_l2_grad


__all__ = [
    "GdConfig",
    "GdResult",
    "gd_gradient",
    "gd_impute",
    "gd_loss",
    "write_gd_trace",
]

logger = logging.getLogger(__name__)


@frozen(kw_only=True)
class GdConfig:
    """
    Step size, iteration budget and smoothness weight of the baseline.
    """

    mu: float = field(default=0.01, converter=float, validator=validators.gt(0))
    max_iters: int = field(default=40, validator=[gv.integer(), validators.ge(0)])
    beta: float = field(default=0.1, converter=float, validator=validators.ge(0))


@frozen
class GdResult:
    """
    Final iterate plus per-iteration traces. ``losses[i]`` and
    ``rmse_missing[i]`` belong to iteration ``i + 1``; for stacked inputs
    they are means over the rows.
    """

    signal: np.ndarray
    losses: np.ndarray
    rmse_missing: np.ndarray | None = None
    snapshots: dict = field(factory=dict)

    def __iter__(self):
        # Unpacks as ``x, trace = gd_impute(...)``.
        return iter((self.signal, self.losses))


def _check(x, obs, g):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != obs.mask.shape or x.shape[-1] != g.n_nodes:
        msg = (
            f"Signal shape {x.shape}, observation shape {obs.mask.shape} and "
            f"graph size {g.n_nodes} do not match."
        )
        raise DimensionMismatch(msg)
    return x


def gd_loss(x, obs, g, beta):
    """
    ``||s_bar - m * tanh(x)||^2 + beta * tv_l2(x)``, one value per row.
    """
    x = _check(x, obs, g)
    resid = obs.signed - obs.mask * np.tanh(x)
    return np.sum(resid**2, axis=-1) + beta * tv_l2(g, x)


def gd_gradient(x, obs, g, beta):
    """
    ``-2 m * (s_bar - m * tanh(x)) * (1 - tanh(x)^2) + 2 beta L x``.
    """
    x = _check(x, obs, g)
    t = np.tanh(x)
    resid = obs.signed - obs.mask * t
    return -2.0 * obs.mask * resid * (1.0 - t * t) + beta * tv_l2_grad(g, x)


def gd_impute(obs, g, cfg, *, truth=None, snapshot_iters=()):
    """
    Run ``x <- x - mu * grad J(x)`` for exactly ``cfg.max_iters`` steps
    starting at zero.

    Args:
        obs (Observation): One realization or ``R x N`` stacked ones.

        g (Graph): The graph of the smoothness term.

        cfg (GdConfig): Step size, iterations and ``beta``.

        truth (numpy.ndarray | None):
            Ground truth in the same units as the iterate; enables the
            ``rmse_missing`` trace.

        snapshot_iters (collections.abc.Iterable[int]):
            Iterations after which a copy of the iterate is kept.

    Raises:
        gsimpute.exceptions.DivergedLoss: If ``J`` stops being finite.
    """
    x = np.zeros(obs.mask.shape)
    losses, errors, snapshots = [], [], {}
    wanted = set(snapshot_iters)
    for it in range(1, cfg.max_iters + 1):
        x = x - cfg.mu * gd_gradient(x, obs, g, cfg.beta)
        loss = float(np.mean(gd_loss(x, obs, g, cfg.beta)))
        if not math.isfinite(loss):
            msg = f"Gradient descent diverged at iteration {it}."
            raise DivergedLoss(msg, step=it)
        losses.append(loss)
        if truth is not None:
            errors.append(batch_metrics(x, truth, obs.mask).rmse_missing)
        if it in wanted:
            snapshots[it] = x.copy()
    logger.debug("Gradient descent finished after %d iterations.", cfg.max_iters)
    return GdResult(
        x,
        np.asarray(losses),
        np.asarray(errors) if truth is not None else None,
        snapshots,
    )


def write_gd_trace(result, path, scale=1.0):
    """
    Write the trace as CSV with columns ``iter``, ``loss`` and, when the run
    had ground truth, ``rmse_missing`` (divided by *scale* to undo a
    normalization).
    """
    with Path(path).open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        has_truth = result.rmse_missing is not None
        writer.writerow(("iter", "loss", "rmse_missing") if has_truth else ("iter", "loss"))
        for i, loss in enumerate(result.losses):
            row = [i + 1, repr(float(loss))]
            if has_truth:
                row.append(repr(float(result.rmse_missing[i] / scale)))
            writer.writerow(row)
