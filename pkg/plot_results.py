# plot_results.py
"""
Render figures for a finished run:

    python plot_results.py runs/desk_benchmark

writes PNGs to <out_dir>/figures/.
"""

import logging
import sys

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from gsimpute.plotting import (  # noqa: E402
    find_seed_dirs,
    plot_eval,
    plot_gd_trace,
    plot_losses,
    snapshot_mosaic,
)


logger = logging.getLogger("plot_results")


def _by_label(seed_dir, suffix):
    return {
        p.name.removesuffix(suffix): p for p in sorted(seed_dir.glob(f"*{suffix}"))
    }


def _save(fig, path):
    fig.savefig(path, dpi=150)
    plt.close(fig)
    logger.info("Wrote %s", path)


def render(out_dir):
    out_dir = Path(out_dir)
    fig_dir = out_dir / "figures"
    fig_dir.mkdir(exist_ok=True)
    for seed, seed_dir in find_seed_dirs(out_dir).items():
        losses = _by_label(seed_dir, "_losses.csv")
        if losses:
            _save(plot_losses(losses), fig_dir / f"seed_{seed}_losses.png")
        evals = _by_label(seed_dir, "_eval.csv")
        if evals:
            _save(plot_eval(evals), fig_dir / f"seed_{seed}_eval.png")
        if (seed_dir / "gd_trace.csv").exists():
            _save(plot_gd_trace(seed_dir / "gd_trace.csv"), fig_dir / f"seed_{seed}_gd.png")
        for label, npz in _by_label(seed_dir, "_snapshots.npz").items():
            mosaic = snapshot_mosaic(npz)
            if mosaic is not None:
                mosaic.save(fig_dir / f"seed_{seed}_{label}_mosaic.png")
    return fig_dir


def main():
    if len(sys.argv) != 2:
        raise SystemExit("usage: python plot_results.py <out_dir>")
    logging.basicConfig(
        level=logging.INFO, format="%(asctime)s - %(levelname)s - %(name)s - %(message)s"
    )
    render(sys.argv[1])


if __name__ == "__main__":
    main()
