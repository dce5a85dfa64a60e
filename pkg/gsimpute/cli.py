# SPDX-License-Identifier: MIT

"""
Command line interface: ``python -m gsimpute {run,validate,gen-data,inspect}``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from pathlib import Path

import numpy as np

from attrs import evolve

from .data import load_idx, read_ground_truth
from .exceptions import ConfigError, GsiError
from .experiment import (
    load_config,
    read_dataset,
    run_experiment,
    validate_config,
    write_dataset,
)
from .graph import connected_components, degree, read_edge_list, spectral_basis
from .observe import read_observations


logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(name)s - %(message)s"

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2

# Number of smallest Laplacian eigenvalues printed by ``inspect``.
_N_EIGS = 5


def _configure_logging(args):
    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)


def _apply_overrides(cfg, args):
    changes = {}
    if getattr(args, "out", None):
        changes["out_dir"] = str(args.out)
    if getattr(args, "seed", None) is not None:
        changes["seeds"] = (args.seed,)
    if getattr(args, "methods", None):
        changes["methods"] = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    try:
        return evolve(cfg, **changes)
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        key = next(iter(changes)) if len(changes) == 1 else "command line"
        raise ConfigError(key, str(e.args[0]) if e.args else str(e)) from None


def cmd_run(args):
    cfg = _apply_overrides(load_config(args.config), args)
    show_progress = sys.stderr.isatty() and not args.quiet
    code = run_experiment(cfg, show_progress=show_progress)
    logger.info("Results in %s.", cfg.out_dir)
    return code


def cmd_validate(args):
    resolved, applied = validate_config(args.config)
    for key in applied:
        logger.info("default applied: %s", key)
    print(json.dumps(resolved, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_gen_data(args):
    cfg = _apply_overrides(load_config(args.config), args)
    out = Path(args.out) if args.out else Path(cfg.out_dir) / "data"
    write_dataset(cfg, cfg.seeds[0], out)
    return EXIT_OK


def graph_stats(g):
    deg = degree(g)
    stats = {
        "nodes": g.n_nodes,
        "edges": g.n_edges,
        "degree_min": float(deg.min()),
        "degree_max": float(deg.max()),
        "components": int(connected_components(g).max()) + 1,
    }
    method = "jacobi" if g.n_nodes <= 128 else "lapack"
    vals = spectral_basis(g, "laplacian", method).eigenvalues
    stats["smallest_eigenvalues"] = [float(v) for v in vals[:_N_EIGS]]
    return stats


def observation_stats(obs):
    mask = np.atleast_2d(obs.mask)
    return {
        "realizations": mask.shape[0],
        "nodes": mask.shape[1],
        "observed_fraction": float(mask.mean()),
    }


def inspect_path(path):
    """
    Summary statistics of a dataset directory, an edge list, a ``GSOB1`` or
    ``GSGT1`` file, or an IDX file.
    """
    path = Path(path)
    if path.is_dir():
        graph, splits = read_dataset(path)
        stats = {"graph": graph_stats(graph)}
        for name, split in splits.items():
            stats[name] = observation_stats(split.observations)
        return stats
    head = path.read_bytes()[:5]
    if head == b"GSOB1":
        return observation_stats(read_observations(path))
    if head == b"GSGT1":
        truth = read_ground_truth(path)
        return {
            "realizations": truth.shape[0],
            "nodes": truth.shape[1],
            "min": float(truth.min()),
            "max": float(truth.max()),
        }
    if path.suffix == ".edges":
        return graph_stats(read_edge_list(path))
    arr = load_idx(path)
    return {"shape": list(arr.shape), "min": int(arr.min()), "max": int(arr.max())}


def cmd_inspect(args):
    print(json.dumps(inspect_path(args.path), indent=2))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gsimpute",
        description="Impute graph signals from masked one-bit observations.",
    )
    noise = parser.add_mutually_exclusive_group()
    noise.add_argument("-v", "--verbose", action="store_true", help="Log debug messages.")
    noise.add_argument("-q", "--quiet", action="store_true", help="Log warnings and errors only.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run an experiment.")
    run.add_argument("--config", type=Path, required=True, help="Path to the JSON config.")
    run.add_argument("--out", type=Path, help="Output directory (overrides out_dir).")
    run.add_argument("--seed", type=int, help="Run this seed only (overrides seeds).")
    run.add_argument("--methods", help="Comma-separated subset of proposed,gain,gd.")
    run.set_defaults(func=cmd_run)

    val = sub.add_parser("validate", help="Print the resolved config.")
    val.add_argument("--config", type=Path, required=True, help="Path to the JSON config.")
    val.set_defaults(func=cmd_validate)

    gen = sub.add_parser("gen-data", help="Write the graph and data splits of one seed.")
    gen.add_argument("--config", type=Path, required=True, help="Path to the JSON config.")
    gen.add_argument("--out", type=Path, help="Dataset directory (default <out_dir>/data).")
    gen.add_argument("--seed", type=int, help="Seed to generate (default: first in config).")
    gen.set_defaults(func=cmd_gen_data)

    insp = sub.add_parser("inspect", help="Print graph or dataset statistics.")
    insp.add_argument("path", type=Path, help="Dataset directory or data file.")
    insp.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    _configure_logging(args)
    try:
        return args.func(args)
    except ConfigError as e:
        logger.error("Invalid configuration: %s", e)
        return EXIT_CONFIG
    except (GsiError, OSError) as e:
        logger.error("%s", e)
        return EXIT_FAILED
