# SPDX-License-Identifier: MIT

"""
Config-driven experiments comparing the graph-regularized imputer, its
``beta = 0`` ablation and the gradient-descent baseline.

A run writes, below ``out_dir``::

    resolved_config.json
    summary.csv                 mean errors per method over the seeds
    per_seed.csv                errors per (method, seed)
    seed_<s>/<method>_losses.csv
    seed_<s>/<method>_eval.csv
    seed_<s>/<method>_generator.gsnn
    seed_<s>/<method>_discriminator.gsnn
    seed_<s>/<method>_snapshots.npz
    seed_<s>/gd_trace.csv

Every file is written by exactly one job, so methods and seeds run
concurrently on a thread pool capped by `gsimpute.get_threads`.
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
import math

from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from attrs import NOTHING, Factory, asdict, evolve, fields, filters, frozen, field, validators

from . import validators as gv
from ._config import get_threads
from .baseline import GdConfig, gd_impute, write_gd_trace
from .converters import to_int_tuple
from .data import (
    Dataset,
    Normalization,
    batch_metrics,
    gen_bandlimited,
    gen_smooth,
    load_mnist_images,
    make_dataset,
    pixel_features,
    random_points,
    read_ground_truth,
    write_ground_truth,
)
from .exceptions import ConfigError, DivergedLoss
from .gan import GanConfig, impute, new_trainer, train, write_loss_history
from .graph import (
    Graph,
    SpectralDecomposition,
    connected_components,
    knn_graph,
    read_edge_list,
    spectral_basis,
    write_edge_list,
)
from .neural import save_checkpoint
from .observe import read_observations, write_observations


__all__ = [
    "EVAL_COLUMNS",
    "METHODS",
    "ExperimentConfig",
    "JobResult",
    "MnistData",
    "SeedData",
    "SyntheticData",
    "config_from_dict",
    "load_config",
    "method_configs",
    "prepare_seed",
    "read_dataset",
    "resolved_config",
    "run_experiment",
    "validate_config",
    "write_dataset",
]

logger = logging.getLogger(__name__)

METHODS = ("proposed", "gain", "gd")

EVAL_COLUMNS = (
    "epoch",
    "train_rmse_observed",
    "train_rmse_missing",
    "test_rmse_missing",
    "test_rmse_all",
)
PER_SEED_COLUMNS = ("method", "seed", "rmse_missing", "rmse_observed", "rmse_all", "n_test")
SUMMARY_COLUMNS = (
    "method",
    "n_seeds",
    "rmse_missing",
    "rmse_missing_std",
    "rmse_observed",
    "rmse_all",
)


def _positive_int():
    return [gv.integer(), validators.gt(0)]


@frozen(kw_only=True)
class SyntheticData:
    """
    A k-NN graph over random points with smooth or bandlimited signals on it.
    """

    source: str = field(default="synthetic", validator=validators.in_(("synthetic",)))
    n_nodes: int = field(default=64, validator=[gv.integer(), validators.gt(1)])
    point_dim: int = field(default=2, validator=_positive_int())
    k: int = field(default=6, validator=_positive_int())
    weighting: str = field(
        default="binary", validator=validators.in_(("binary", "inverse_distance"))
    )
    generator: str = field(default="smooth", validator=validators.in_(("smooth", "bandlimited")))
    filter_decay: float = field(default=3.0, converter=float, validator=validators.ge(0))
    bandwidth: int = field(default=10, validator=_positive_int())
    r_train: int = field(default=2000, validator=_positive_int())
    r_test: int = field(default=200, validator=_positive_int())

    def __attrs_post_init__(self):
        if self.k >= self.n_nodes:
            raise ConfigError("k", f"must be below n_nodes={self.n_nodes} (got {self.k})")
        if self.generator == "bandlimited" and self.bandwidth > self.n_nodes:
            msg = f"must not exceed n_nodes={self.n_nodes} (got {self.bandwidth})"
            raise ConfigError("bandwidth", msg)


@frozen(kw_only=True)
class MnistData:
    """
    Local MNIST IDX image files; pixels are the graph's nodes.
    """

    source: str = field(default="mnist", validator=validators.in_(("mnist",)))
    train_images: str = field(validator=validators.instance_of(str))
    test_images: str = field(validator=validators.instance_of(str))
    r_train: int | None = field(
        default=None, validator=validators.optional(_positive_int())
    )
    r_test: int | None = field(default=None, validator=validators.optional(_positive_int()))
    graph_subsample: int = field(default=1000, validator=_positive_int())
    k: int = field(default=20, validator=_positive_int())


DATA_SOURCES = {"synthetic": SyntheticData, "mnist": MnistData}


def _check_methods(inst, attribute, value):
    if not value:
        msg = "at least one method is required"
        raise ValueError(msg)
    bad = [m for m in value if m not in METHODS]
    if bad:
        msg = f"unknown method {bad[0]!r}; choose from {', '.join(METHODS)}"
        raise ValueError(msg)
    if len(set(value)) != len(value):
        msg = f"methods are listed twice: {list(value)!r}"
        raise ValueError(msg)


def _check_seeds(inst, attribute, value):
    if not value:
        msg = "at least one seed is required"
        raise ValueError(msg)
    if any(s < 0 for s in value):
        msg = f"seeds must be non-negative (got {list(value)!r})"
        raise ValueError(msg)
    if len(set(value)) != len(value):
        msg = f"seeds are listed twice: {list(value)!r}"
        raise ValueError(msg)


# Derived per experiment seed; never read from the config.
_DERIVED_GAN_KEYS = ("rng_seed",)


def _check_grid(inst, attribute, value):
    if not isinstance(value, dict):
        msg = f"must be an object mapping gan keys to lists (got {type(value).__name__})"
        raise TypeError(msg)
    known = {a.name for a in fields(GanConfig)} - set(_DERIVED_GAN_KEYS)
    for key, options in value.items():
        if key not in known:
            msg = f"{key!r} is not a gan key that can be swept"
            raise ValueError(msg)
        if not isinstance(options, list) or not options:
            msg = f"{key!r} needs a non-empty list of values"
            raise ValueError(msg)


@frozen(kw_only=True)
class ExperimentConfig:
    """
    Everything a run needs. ``gain`` uses ``gan`` with ``beta = 0``; a
    non-empty ``grid`` expands ``proposed`` into one variant per combination
    of the listed ``gan`` values.
    """

    data: SyntheticData | MnistData = field(
        factory=SyntheticData, metadata={"variants": DATA_SOURCES, "tag": "source"}
    )
    p_observe: float = field(
        default=0.5, converter=float, validator=gv.unit_interval(open_left=True)
    )
    methods: tuple = field(default=METHODS, converter=tuple, validator=_check_methods)
    gan: GanConfig = field(
        factory=GanConfig, metadata={"nested": GanConfig, "derived": _DERIVED_GAN_KEYS}
    )
    gd: GdConfig = field(factory=GdConfig, metadata={"nested": GdConfig})
    out_dir: str = field(default="runs/experiment", validator=validators.instance_of(str))
    seeds: tuple = field(default=(0,), converter=to_int_tuple, validator=_check_seeds)
    eval_every: int = field(default=1, validator=_positive_int())
    snapshot_epochs: tuple = field(default=(), converter=to_int_tuple)
    snapshot_iters: tuple = field(default=(), converter=to_int_tuple)
    snapshot_count: int = field(
        default=8, validator=[gv.integer(), validators.ge(0)]
    )
    gft_shift: str = field(default="laplacian", validator=validators.in_(("laplacian", "adjacency")))
    eigensolver: str = field(default="jacobi", validator=validators.in_(("jacobi", "lapack")))
    grid: dict = field(factory=dict, validator=_check_grid)

    def __attrs_post_init__(self):
        for key, options in self.grid.items():
            for option in options:
                try:
                    evolve(self.gan, **{key: option})
                except (TypeError, ValueError) as e:
                    raise ConfigError(f"grid.{key}", _reason(e)) from None
        n = getattr(self.data, "n_nodes", None)
        if n is None:
            return
        _check_bandwidth(self, n)


def _reason(exc):
    return str(exc.args[0]) if exc.args else str(exc)


def _default(a):
    if isinstance(a.default, Factory):
        return a.default.factory()
    return a.default


def _structure(cls, raw, prefix, applied, derived=()):
    where = prefix.rstrip(".") or "<root>"
    if not isinstance(raw, dict):
        raise ConfigError(where, f"expected an object, got {type(raw).__name__}")
    known = {a.name for a in fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(prefix + unknown[0], "unknown key")
    for name in derived:
        if name in raw:
            raise ConfigError(prefix + name, "is derived from the experiment seed and cannot be set")

    kwargs = {}
    for a in fields(cls):
        key = prefix + a.name
        if "variants" in a.metadata:
            value = raw.get(a.name, {})
            tag_key = a.metadata["tag"]
            if not isinstance(value, dict):
                raise ConfigError(key, f"expected an object, got {type(value).__name__}")
            if tag_key not in value:
                applied.append(f"{key}.{tag_key}")
            tag = value.get(tag_key, next(iter(a.metadata["variants"])))
            variant = a.metadata["variants"].get(tag)
            if variant is None:
                options = ", ".join(a.metadata["variants"])
                raise ConfigError(f"{key}.{tag_key}", f"must be one of {options} (got {tag!r})")
            kwargs[a.name] = _structure(variant, value, key + ".", applied)
            continue
        if "nested" in a.metadata:
            kwargs[a.name] = _structure(
                a.metadata["nested"],
                raw.get(a.name, {}),
                key + ".",
                applied,
                a.metadata.get("derived", ()),
            )
            continue

        if a.name in raw:
            value = raw[a.name]
        elif a.default is NOTHING:
            raise ConfigError(key, "required key is missing")
        else:
            value = _default(a)
            if a.name not in derived:
                applied.append(key)
        try:
            if a.converter is not None:
                value = a.converter(value)
            if a.validator is not None:
                a.validator(None, a, value)
        except (TypeError, ValueError) as e:
            raise ConfigError(key, _reason(e)) from None
        kwargs[a.name] = value

    try:
        return cls(**kwargs)
    except ConfigError as e:
        raise ConfigError(prefix + e.key, e.reason) from None
    except (TypeError, ValueError) as e:
        raise ConfigError(where, _reason(e)) from None


def config_from_dict(raw):
    """
    Structure a decoded JSON object into an `ExperimentConfig`.

    Returns:
        tuple[ExperimentConfig, list[str]]:
            The config and the dotted keys that were filled with defaults.

    Raises:
        gsimpute.exceptions.ConfigError: Naming the offending key.
    """
    applied = []
    cfg = _structure(ExperimentConfig, raw, "", applied)
    return cfg, applied


def _read_json(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(str(path), "file not found") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(str(path), f"invalid JSON ({e.msg} at line {e.lineno})") from None


def load_config(path):
    """
    Read and structure the JSON config at *path*.
    """
    cfg, applied = config_from_dict(_read_json(path))
    if applied:
        logger.debug("Defaults applied: %s", ", ".join(applied))
    return cfg


def validate_config(path):
    """
    Fill defaults and check every invariant of the config at *path*.

    Returns:
        tuple[dict, list[str]]:
            The fully resolved config (see `resolved_config`) and the keys
            that received defaults.
    """
    cfg, applied = config_from_dict(_read_json(path))
    return resolved_config(cfg), applied


def _expand_methods(cfg):
    out = {}
    for method in cfg.methods:
        if method == "gd":
            out["gd"] = cfg.gd
        elif method == "gain":
            out["gain"] = evolve(cfg.gan, beta=0.0)
        elif not cfg.grid:
            out["proposed"] = cfg.gan
        else:
            keys = sorted(cfg.grid)
            for combo in itertools.product(*(cfg.grid[k] for k in keys)):
                label = "proposed-" + "-".join(f"{k}{v}" for k, v in zip(keys, combo))
                out[label] = evolve(cfg.gan, **dict(zip(keys, combo)))
    return out


def _check_bandwidth(cfg, n_nodes):
    for label, mc in _expand_methods(cfg).items():
        if isinstance(mc, GanConfig) and mc.regularizer == "bl_energy" and mc.bandwidth > n_nodes:
            swept = label.startswith("proposed-") and "bandwidth" in cfg.grid
            key = "grid.bandwidth" if swept else "gan.bandwidth"
            raise ConfigError(key, f"must not exceed n_nodes={n_nodes} (got {mc.bandwidth})")


def method_configs(cfg):
    """
    Map each run label to its method config, in the order of
    ``cfg.methods``.
    """
    out = _expand_methods(cfg)
    if "proposed" in out and out["proposed"].beta == 0:
        logger.warning("proposed runs with beta=0 and matches the gain ablation.")
    return out


def resolved_config(cfg):
    """
    JSON-ready view of *cfg* plus the effective config of every run label.

    The generator seed is left out: each job derives it from its experiment
    seed.
    """
    hidden = filters.exclude(fields(GanConfig).rng_seed)
    resolved = asdict(cfg, filter=hidden)
    resolved["method_configs"] = {
        label: asdict(mc, filter=hidden) for label, mc in method_configs(cfg).items()
    }
    return resolved


@frozen
class SeedData:
    """
    Graph, splits and derived seeds shared by all methods of one experiment
    seed.
    """

    graph: Graph
    spectrum: SpectralDecomposition | None
    train: Dataset
    test: Dataset
    gan_seed: int
    eval_seed: int


@frozen
class JobResult:
    method: str
    seed: int
    rmse_missing: float
    rmse_observed: float
    rmse_all: float
    n_test: int
    diverged: bool = False


def _seed_ints(seed, count):
    return [int(c.generate_state(1)[0]) for c in np.random.SeedSequence(seed).spawn(count)]


def _needs_spectrum(cfg):
    return any(
        isinstance(mc, GanConfig) and mc.regularizer == "bl_energy"
        for mc in method_configs(cfg).values()
    )


def prepare_seed(cfg, seed):
    """
    Build the graph and the normalized, observed train/test splits for
    *seed*. Every random draw is seeded from a separate child of *seed*.
    """
    (point_seed, train_seed, test_seed, train_mask_seed, test_mask_seed,
     gan_seed, eval_seed) = _seed_ints(seed, 7)
    src = cfg.data
    spectrum = None
    if isinstance(src, SyntheticData):
        points = random_points(src.n_nodes, src.point_dim, point_seed)
        graph = knn_graph(points, src.k, src.weighting)
        basis = spectral_basis(graph, "laplacian", cfg.eigensolver)
        if src.generator == "smooth":
            train_raw = gen_smooth(basis, src.r_train, src.filter_decay, train_seed)
            test_raw = gen_smooth(basis, src.r_test, src.filter_decay, test_seed)
        else:
            train_raw = gen_bandlimited(basis, src.r_train, src.bandwidth, train_seed)
            test_raw = gen_bandlimited(basis, src.r_test, src.bandwidth, test_seed)
        if cfg.gft_shift == "laplacian":
            spectrum = basis
    else:
        train_raw = load_mnist_images(src.train_images, src.r_train)
        test_raw = load_mnist_images(src.test_images, src.r_test)
        features = pixel_features(train_raw, src.graph_subsample, point_seed)
        graph = knn_graph(features, src.k)
    _check_bandwidth(cfg, graph.n_nodes)
    if spectrum is None and _needs_spectrum(cfg):
        spectrum = spectral_basis(graph, cfg.gft_shift, cfg.eigensolver)

    n_comp = int(connected_components(graph).max()) + 1
    if n_comp > 1:
        logger.warning("Seed %d: the graph has %d connected components.", seed, n_comp)

    train_set = make_dataset(train_raw, cfg.p_observe, train_mask_seed)
    test_set = make_dataset(test_raw, cfg.p_observe, test_mask_seed, train_set.normalization)
    logger.info(
        "Seed %d: %d nodes, %d edges, %d train and %d test signals.",
        seed, graph.n_nodes, graph.n_edges, len(train_set), len(test_set),
    )
    return SeedData(graph, spectrum, train_set, test_set, gan_seed, eval_seed)


def _write_rows(path, header, rows):
    with Path(path).open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _write_snapshots(path, snapshots, test, count):
    if not snapshots:
        return
    arrays = {f"step_{k}": v for k, v in sorted(snapshots.items())}
    np.savez_compressed(
        path,
        truth=test.signals[:count],
        observed=test.observations.signed[:count],
        **arrays,
    )


def _result(label, seed, test, x_hat_raw):
    m = batch_metrics(x_hat_raw, test.signals, test.observations.mask)
    return JobResult(label, seed, m.rmse_missing, m.rmse_observed, m.rmse_all, len(test))


def _failed(label, seed, test):
    return JobResult(label, seed, math.nan, math.nan, math.nan, len(test), diverged=True)


def _run_gan(cfg, label, gan_cfg, seed, data, seed_dir, show_progress):
    gan_cfg = evolve(gan_cfg, rng_seed=data.gan_seed)
    norm = data.train.normalization
    test = data.test
    n_eval_train = min(len(data.train), len(test))
    train_obs = data.train.observations[:n_eval_train]
    train_truth = data.train.signals[:n_eval_train]
    rng = np.random.default_rng(data.eval_seed)
    z_test = rng.standard_normal(test.observations.mask.shape)
    z_train = rng.standard_normal(train_obs.mask.shape)
    count = cfg.snapshot_count
    wanted = set(cfg.snapshot_epochs)
    rows, snapshots = [], {}

    def on_epoch(state):
        if state.epoch % cfg.eval_every == 0:
            tr = batch_metrics(
                norm.invert(impute(state, train_obs, z_train)), train_truth, train_obs.mask
            )
            te = batch_metrics(
                norm.invert(impute(state, test.observations, z_test)),
                test.signals,
                test.observations.mask,
            )
            rows.append(
                (state.epoch, tr.rmse_observed, tr.rmse_missing, te.rmse_missing, te.rmse_all)
            )
        if count and state.epoch in wanted:
            x_hat = impute(state, test.observations[:count], z_test[:count])
            snapshots[state.epoch] = norm.invert(x_hat)

    artifacts = data.graph if data.spectrum is None else (data.graph, data.spectrum)
    state = new_trainer(data.train.n_nodes, gan_cfg)
    try:
        train(
            data.train.observations,
            artifacts,
            gan_cfg,
            state=state,
            callback=on_epoch,
            show_progress=show_progress,
        )
    except DivergedLoss as e:
        logger.error("%s, seed %d: %s", label, seed, e)
        write_loss_history(state, seed_dir / f"{label}_losses.csv")
        _write_rows(seed_dir / f"{label}_eval.csv", EVAL_COLUMNS, rows)
        return _failed(label, seed, test)

    write_loss_history(state, seed_dir / f"{label}_losses.csv")
    _write_rows(seed_dir / f"{label}_eval.csv", EVAL_COLUMNS, rows)
    save_checkpoint(state.generator, seed_dir / f"{label}_generator.gsnn")
    save_checkpoint(state.discriminator, seed_dir / f"{label}_discriminator.gsnn")
    _write_snapshots(seed_dir / f"{label}_snapshots.npz", snapshots, test, count)
    return _result(label, seed, test, norm.invert(impute(state, test.observations, z_test)))


def _run_gd(cfg, gd_cfg, seed, data, seed_dir):
    norm = data.train.normalization
    test = data.test
    try:
        res = gd_impute(
            test.observations,
            data.graph,
            gd_cfg,
            truth=test.normalized_signals(),
            snapshot_iters=cfg.snapshot_iters,
        )
    except DivergedLoss as e:
        logger.error("gd, seed %d: %s", seed, e)
        return _failed("gd", seed, test)
    write_gd_trace(res, seed_dir / "gd_trace.csv", scale=norm.scale)
    count = cfg.snapshot_count
    if count:
        snaps = {k: norm.invert(v[:count]) for k, v in res.snapshots.items()}
        _write_snapshots(seed_dir / "gd_snapshots.npz", snaps, test, count)
    return _result("gd", seed, test, norm.invert(res.signal))


def _run_job(cfg, label, method_cfg, seed, data, out, show_progress):
    seed_dir = out / f"seed_{seed}"
    logger.info("Running %s for seed %d.", label, seed)
    if isinstance(method_cfg, GdConfig):
        result = _run_gd(cfg, method_cfg, seed, data, seed_dir)
    else:
        result = _run_gan(cfg, label, method_cfg, seed, data, seed_dir, show_progress)
    if not result.diverged:
        logger.info(
            "%s, seed %d: rmse_missing=%.4f rmse_observed=%.4f",
            label, seed, result.rmse_missing, result.rmse_observed,
        )
    return result


def _summary_rows(labels, results):
    for label in labels:
        done = [r for r in results if r.method == label and not r.diverged]
        if not done:
            logger.warning("No completed run of %s; it is left out of the summary.", label)
            continue
        missing = np.array([r.rmse_missing for r in done])
        yield (
            label,
            len(done),
            float(np.mean(missing)),
            float(np.std(missing)),
            float(np.mean([r.rmse_observed for r in done])),
            float(np.mean([r.rmse_all for r in done])),
        )


def run_experiment(cfg, *, show_progress=False):
    """
    Run every method for every seed and write the artifacts listed in the
    module docstring.

    Returns:
        int: ``0`` if every job completed, ``1`` if any loss diverged.
    """
    threads = get_threads()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "resolved_config.json").write_text(
        json.dumps(resolved_config(cfg), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    methods = method_configs(cfg)
    for seed in cfg.seeds:
        (out / f"seed_{seed}").mkdir(exist_ok=True)

    jobs = [(label, seed) for label in methods for seed in cfg.seeds]
    workers = max(1, min(threads, len(jobs)))
    logger.info("%d jobs on %d worker(s).", len(jobs), workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        prepared = dict(zip(cfg.seeds, pool.map(lambda s: prepare_seed(cfg, s), cfg.seeds)))
        futures = [
            pool.submit(
                _run_job,
                cfg,
                label,
                methods[label],
                seed,
                prepared[seed],
                out,
                show_progress and workers == 1,
            )
            for label, seed in jobs
        ]
        results = [f.result() for f in futures]

    _write_rows(
        out / "per_seed.csv",
        PER_SEED_COLUMNS,
        (
            (r.method, r.seed, r.rmse_missing, r.rmse_observed, r.rmse_all, r.n_test)
            for r in results
        ),
    )
    _write_rows(out / "summary.csv", SUMMARY_COLUMNS, _summary_rows(list(methods), results))
    diverged = [f"{r.method}/seed {r.seed}" for r in results if r.diverged]
    if diverged:
        logger.error("Diverged: %s.", ", ".join(diverged))
        return 1
    return 0


def write_dataset(cfg, seed, out_dir):
    """
    Write the graph and both splits of *seed* as ``graph.edges``,
    ``{train,test}.gsob``, ``{train,test}.gsgt`` and ``normalization.json``.
    """
    data = prepare_seed(cfg, seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_edge_list(data.graph, out / "graph.edges")
    for name, split in (("train", data.train), ("test", data.test)):
        write_observations(out / f"{name}.gsob", split.observations)
        write_ground_truth(out / f"{name}.gsgt", split.signals)
    (out / "normalization.json").write_text(
        json.dumps(asdict(data.train.normalization), indent=2) + "\n", encoding="utf-8"
    )
    logger.info("Wrote dataset for seed %d to %s.", seed, out)
    return data


def read_dataset(path):
    """
    Read a directory written by `write_dataset`.

    Returns:
        tuple[Graph, dict[str, Dataset]]: The graph and the splits found.
    """
    path = Path(path)
    graph = read_edge_list(path / "graph.edges")
    norm = None
    if (path / "normalization.json").exists():
        norm = Normalization(**json.loads((path / "normalization.json").read_text("utf-8")))
    splits = {}
    for name in ("train", "test"):
        obs_path = path / f"{name}.gsob"
        if not obs_path.exists():
            continue
        truth_path = path / f"{name}.gsgt"
        truth = read_ground_truth(truth_path) if truth_path.exists() else None
        splits[name] = Dataset(read_observations(obs_path), truth, norm)
    return graph, splits
