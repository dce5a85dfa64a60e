# SPDX-License-Identifier: MIT

"""
Figures and image mosaics rendered from the files a run leaves behind.

`matplotlib` and `Pillow` are imported on first use.
"""

from __future__ import annotations

import csv
import math

from pathlib import Path

import numpy as np


__all__ = [
    "find_seed_dirs",
    "plot_eval",
    "plot_gd_trace",
    "plot_losses",
    "read_csv",
    "read_rows",
    "render_signals",
    "snapshot_mosaic",
]


def read_rows(path):
    """
    Rows of a CSV file as dicts of strings.
    """
    with Path(path).open(newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


def read_csv(path):
    """
    Numeric columns of a CSV file as float arrays.
    """
    rows = read_rows(path)
    if not rows:
        return {}
    return {col: np.array([float(r[col]) for r in rows]) for col in rows[0]}


def find_seed_dirs(out_dir):
    """
    ``{seed: directory}`` for every ``seed_<s>`` below *out_dir*.
    """
    found = {}
    for p in Path(out_dir).glob("seed_*"):
        suffix = p.name.removeprefix("seed_")
        if p.is_dir() and suffix.isdigit():
            found[int(suffix)] = p
    return dict(sorted(found.items()))


def _subplots(ncols=1):
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, ncols, figsize=(5.0 * ncols, 3.5), squeeze=False)
    return fig, axes[0]


def plot_losses(histories):
    """
    Generator total loss and discriminator loss against the epoch.

    Args:
        histories (dict[str, pathlib.Path]): Label to ``*_losses.csv``.
    """
    fig, (ax_g, ax_d) = _subplots(2)
    for label, path in histories.items():
        cols = read_csv(path)
        if not cols:
            continue
        ax_g.plot(cols["epoch"], cols["loss_g_total"], label=label)
        ax_d.plot(cols["epoch"], cols["loss_d"], label=label)
    ax_g.set(xlabel="epoch", ylabel="generator loss")
    ax_d.set(xlabel="epoch", ylabel="discriminator loss")
    ax_g.legend()
    fig.tight_layout()
    return fig


def plot_eval(evals):
    """
    Test error at missing nodes (solid) and training error at missing nodes
    (dashed) against the epoch.
    """
    fig, (ax,) = _subplots()
    for label, path in evals.items():
        cols = read_csv(path)
        if not cols:
            continue
        (line,) = ax.plot(cols["epoch"], cols["test_rmse_missing"], label=f"{label} test")
        ax.plot(
            cols["epoch"],
            cols["train_rmse_missing"],
            linestyle="--",
            color=line.get_color(),
            label=f"{label} train",
        )
    ax.set(xlabel="epoch", ylabel="rmse at missing nodes")
    ax.legend()
    fig.tight_layout()
    return fig


def plot_gd_trace(path):
    """
    Baseline loss and error against the iteration.
    """
    cols = read_csv(path)
    fig, (ax_l, ax_e) = _subplots(2)
    ax_l.plot(cols["iter"], cols["loss"])
    ax_l.set(xlabel="iteration", ylabel="J(x)")
    if "rmse_missing" in cols:
        ax_e.plot(cols["iter"], cols["rmse_missing"])
    ax_e.set(xlabel="iteration", ylabel="rmse at missing nodes")
    fig.tight_layout()
    return fig


def render_signals(rows, lo, hi):
    """
    Grayscale tiles of square-shaped signals (``N`` must be a square, as for
    MNIST), one per row of *rows*, with *lo* mapped to black and *hi* to white.

    Returns:
        list[PIL.Image.Image] | None: `None` if ``N`` is not a square.
    """
    from PIL import Image

    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    side = math.isqrt(rows.shape[1])
    if side * side != rows.shape[1]:
        return None
    span = hi - lo if hi > lo else 1.0
    scaled = np.clip((rows - lo) / span, 0.0, 1.0)
    pixels = np.round(scaled * 255).astype(np.uint8)
    return [Image.fromarray(p.reshape(side, side)) for p in pixels]


def snapshot_mosaic(path, zoom=3, pad=2):
    """
    Mosaic of a ``*_snapshots.npz`` file: the observed signs on top, one row
    per stored step, the ground truth at the bottom; one column per signal.

    Returns:
        PIL.Image.Image | None: `None` if the signals are not square images.
    """
    from PIL import Image

    with np.load(path) as npz:
        truth = npz["truth"]
        observed = npz["observed"].astype(np.float64)
        steps = sorted(
            (k for k in npz.files if k.startswith("step_")),
            key=lambda k: int(k.removeprefix("step_")),
        )
        snaps = [npz[k] for k in steps]
    lo, hi = float(truth.min()), float(truth.max())
    grid = [render_signals(observed, -1.0, 1.0)]
    grid.extend(render_signals(s, lo, hi) for s in snaps)
    grid.append(render_signals(truth, lo, hi))
    if any(row is None for row in grid):
        return None

    tile = grid[0][0].width * zoom
    n_cols, n_rows = len(grid[0]), len(grid)
    canvas = Image.new("L", (n_cols * (tile + pad) + pad, n_rows * (tile + pad) + pad), 255)
    for r, row in enumerate(grid):
        for c, img in enumerate(row):
            big = img.resize((tile, tile), Image.NEAREST)
            canvas.paste(big, (pad + c * (tile + pad), pad + r * (tile + pad)))
    return canvas
