# SPDX-License-Identifier: MIT

import csv
import json

from pathlib import Path
from typing import NamedTuple

import numpy as np
import pytest

from attrs import asdict, evolve, fields, filters

from gsimpute.data import write_idx
from gsimpute.exceptions import ConfigError
from gsimpute.experiment import (
    EVAL_COLUMNS,
    ExperimentConfig,
    MnistData,
    config_from_dict,
    load_config,
    method_configs,
    prepare_seed,
    read_dataset,
    resolved_config,
    run_experiment,
    validate_config,
    write_dataset,
)
from gsimpute.gan import GanConfig


def tiny(out_dir, **changes):
    raw = {
        "data": {"n_nodes": 12, "k": 3, "r_train": 20, "r_test": 6},
        "gan": {"epochs": 2, "batch_size": 8, "hidden_widths": [8]},
        "gd": {"max_iters": 5},
        "seeds": [0],
        "out_dir": str(out_dir),
    }
    raw.update(changes)
    return raw


def read_rows(path):
    with path.open(newline="") as f:
        return list(csv.reader(f))


class BadCase(NamedTuple):
    """
    A config fragment and the key its error must name.
    """

    name: str
    raw: dict
    key: str


BAD_CASES = [
    BadCase("negative_batch", {"gan": {"batch_size": -1}}, "gan.batch_size"),
    BadCase("nothing_observed", {"p_observe": 0}, "p_observe"),
    BadCase("p_above_one", {"p_observe": 1.5}, "p_observe"),
    BadCase("unknown_top_key", {"gamma": 1}, "gamma"),
    BadCase("unknown_gan_key", {"gan": {"gamma": 1}}, "gan.gamma"),
    BadCase("no_methods", {"methods": []}, "methods"),
    BadCase("unknown_method", {"methods": ["proposed", "vae"]}, "methods"),
    BadCase("k_too_large", {"data": {"n_nodes": 5, "k": 5}}, "data.k"),
    BadCase(
        "bandwidth_too_large",
        {"data": {"n_nodes": 5, "k": 2, "generator": "bandlimited", "bandwidth": 6}},
        "data.bandwidth",
    ),
    BadCase(
        "gan_bandwidth_too_large",
        {"data": {"n_nodes": 8, "k": 2}, "gan": {"regularizer": "bl_energy", "bandwidth": 100}},
        "gan.bandwidth",
    ),
    BadCase(
        "grid_bandwidth_too_large",
        {
            "data": {"n_nodes": 8, "k": 2},
            "gan": {"regularizer": "bl_energy", "bandwidth": 4},
            "grid": {"bandwidth": [2, 9]},
        },
        "grid.bandwidth",
    ),
    BadCase("unknown_source", {"data": {"source": "cifar"}}, "data.source"),
    BadCase("mnist_paths", {"data": {"source": "mnist", "test_images": "t"}}, "data.train_images"),
    BadCase("bad_regularizer", {"gan": {"regularizer": "tv_l3"}}, "gan.regularizer"),
    BadCase("gd_step", {"gd": {"mu": 0}}, "gd.mu"),
    BadCase("gan_not_object", {"gan": [1, 2]}, "gan"),
    BadCase("grid_key", {"grid": {"rng_seed": [1, 2]}}, "grid"),
    BadCase("grid_value", {"grid": {"batch_size": [4, -1]}}, "grid.batch_size"),
    BadCase("negative_seed", {"seeds": [0, -3]}, "seeds"),
    BadCase("duplicate_seed", {"seeds": [0, 1, 0]}, "seeds"),
    BadCase("boolean_batch", {"gan": {"batch_size": True}}, "gan.batch_size"),
    BadCase("boolean_width", {"gan": {"hidden_widths": [8, True]}}, "gan.hidden_widths"),
    BadCase("boolean_nodes", {"data": {"n_nodes": True}}, "data.n_nodes"),
    BadCase("derived_gan_seed", {"gan": {"rng_seed": 3}}, "gan.rng_seed"),
]


class TestConfig:
    def test_defaults(self):
        cfg, applied = config_from_dict({})

        assert ExperimentConfig() == cfg
        assert {"data.source", "gan.alpha", "gd.mu", "p_observe", "seeds"} <= set(applied)
        assert "gan.rng_seed" not in applied

    def test_bandwidth_ignored_where_unused(self):
        cfg, _ = config_from_dict({"data": {"n_nodes": 6, "k": 2}, "gan": {"bandwidth": 50}})

        assert 10 == cfg.data.bandwidth
        assert "tv_l2" == cfg.gan.regularizer

    def test_missing_alpha_is_reported(self):
        cfg, applied = config_from_dict({"gan": {"beta": 0.2}})

        assert 10.0 == cfg.gan.alpha
        assert "gan.alpha" in applied
        assert "gan.beta" not in applied

    @pytest.mark.parametrize("case", BAD_CASES, ids=[c.name for c in BAD_CASES])
    def test_errors_name_the_key(self, case):
        with pytest.raises(ConfigError) as ei:
            config_from_dict(case.raw)

        assert case.key == ei.value.key
        assert str(ei.value).startswith(case.key + ":")

    def test_mnist_source(self):
        cfg, _ = config_from_dict(
            {"data": {"source": "mnist", "train_images": "a", "test_images": "b", "r_train": 10}}
        )

        assert isinstance(cfg.data, MnistData)
        assert 10 == cfg.data.r_train
        assert cfg.data.r_test is None

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(tiny(tmp_path / "out")))

        cfg = load_config(path)

        assert 12 == cfg.data.n_nodes
        assert (8,) == cfg.gan.hidden_widths

    def test_benchmark_file(self):
        cfg = load_config(Path(__file__).parents[1] / "configs" / "desk_benchmark.json")

        assert (10.0, 0.1, 200) == (cfg.gan.alpha, cfg.gan.beta, cfg.gan.epochs)
        assert 0.1 == cfg.gan.surrogate_temperature
        assert 64 == cfg.data.n_nodes

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="file not found"):
            load_config(tmp_path / "nope.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text("{'gan': }")

        with pytest.raises(ConfigError, match="invalid JSON"):
            load_config(path)


class TestMethodConfigs:
    def test_gain_differs_only_in_beta(self):
        cfg, _ = config_from_dict({"gan": {"beta": 0.3, "alpha": 4}})
        configs = method_configs(cfg)
        proposed, gain = asdict(configs["proposed"]), asdict(configs["gain"])

        assert ["proposed", "gain", "gd"] == list(configs)
        assert 0.3 == proposed.pop("beta")
        assert 0.0 == gain.pop("beta")
        assert proposed == gain

    def test_grid_expands_proposed(self):
        cfg, _ = config_from_dict(
            {"methods": ["proposed", "gd"], "grid": {"beta": [0.0, 0.5], "alpha": [1.0, 10.0]}}
        )
        configs = method_configs(cfg)

        assert [
            "proposed-alpha1.0-beta0.0",
            "proposed-alpha1.0-beta0.5",
            "proposed-alpha10.0-beta0.0",
            "proposed-alpha10.0-beta0.5",
            "gd",
        ] == list(configs)
        assert 0.5 == configs["proposed-alpha10.0-beta0.5"].beta

    def test_resolved_config_is_json(self, tmp_path):
        cfg, _ = config_from_dict(tiny(tmp_path))
        resolved = json.loads(json.dumps(resolved_config(cfg)))

        assert 0.0 == resolved["method_configs"]["gain"]["beta"]
        assert "gd" in resolved["method_configs"]
        assert [8] == resolved["gan"]["hidden_widths"]
        assert "rng_seed" not in resolved["gan"]
        assert "rng_seed" not in resolved["method_configs"]["proposed"]

    def test_validate_config(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"gan": {"beta": 0.2}}))

        resolved, applied = validate_config(path)

        assert 10.0 == resolved["gan"]["alpha"]
        assert "gan.alpha" in applied


class TestPrepareSeed:
    def test_deterministic(self, tmp_path):
        cfg, _ = config_from_dict(tiny(tmp_path))
        a, b = prepare_seed(cfg, 3), prepare_seed(cfg, 3)

        assert a.graph == b.graph
        assert a.train == b.train
        assert a.test == b.test
        assert (a.gan_seed, a.eval_seed) == (b.gan_seed, b.eval_seed)

    def test_seeds_differ(self, tmp_path):
        cfg, _ = config_from_dict(tiny(tmp_path))

        assert not np.array_equal(
            prepare_seed(cfg, 0).train.signals, prepare_seed(cfg, 1).train.signals
        )

    def test_splits(self, tmp_path):
        cfg, _ = config_from_dict(tiny(tmp_path))
        data = prepare_seed(cfg, 0)

        assert (20, 12) == data.train.signals.shape
        assert (6, 12) == data.test.signals.shape
        assert data.train.normalization == data.test.normalization
        assert data.spectrum is not None

    def test_spectrum_only_when_needed(self, tmp_path):
        cfg, _ = config_from_dict(tiny(tmp_path, gft_shift="adjacency"))
        assert prepare_seed(cfg, 0).spectrum is None

        cfg = evolve(cfg, gan=evolve(cfg.gan, regularizer="bl_energy", bandwidth=3))
        spectrum = prepare_seed(cfg, 0).spectrum
        assert spectrum is not None
        assert spectrum.eigenvalues.min() < -1e-9

    def test_mnist_bandwidth_checked_against_pixels(self, tmp_path):
        images = tmp_path / "images.idx"
        write_idx(images, np.random.default_rng(0).integers(0, 256, size=(6, 3, 3), dtype=np.uint8))
        raw = {
            "data": {"source": "mnist", "train_images": str(images), "test_images": str(images), "k": 2},
            "gan": {"regularizer": "bl_energy", "bandwidth": 20},
            "out_dir": str(tmp_path / "out"),
        }
        cfg, _ = config_from_dict(raw)

        with pytest.raises(ConfigError) as ei:
            prepare_seed(cfg, 0)

        assert "gan.bandwidth" == ei.value.key

    def test_bandlimited_generator(self, tmp_path):
        raw = tiny(tmp_path)
        raw["data"].update(generator="bandlimited", bandwidth=4)
        cfg, _ = config_from_dict(raw)

        assert (20, 12) == prepare_seed(cfg, 0).train.signals.shape


class TestDatasetFiles:
    def test_roundtrip(self, tmp_path):
        cfg, _ = config_from_dict(tiny(tmp_path))
        data = write_dataset(cfg, 0, tmp_path / "data")

        graph, splits = read_dataset(tmp_path / "data")

        assert data.graph == graph
        assert data.train == splits["train"]
        assert data.test == splits["test"]
        assert {"graph.edges", "train.gsob", "test.gsgt", "normalization.json"} <= {
            p.name for p in (tmp_path / "data").iterdir()
        }


class TestRunExperiment:
    def test_gd_only(self, tmp_path):
        out = tmp_path / "run"
        cfg, _ = config_from_dict(tiny(out, methods=["gd"], seeds=[0, 1]))

        assert 0 == run_experiment(cfg)

        summary = read_rows(out / "summary.csv")
        assert ["method", "n_seeds", "rmse_missing", "rmse_missing_std", "rmse_observed", "rmse_all"] == summary[0]
        assert 1 == len(summary) - 1
        assert ["gd", "2"] == summary[1][:2]
        assert 3 == len(read_rows(out / "per_seed.csv"))
        trace = read_rows(out / "seed_1" / "gd_trace.csv")
        assert ["iter", "loss", "rmse_missing"] == trace[0]
        assert 5 == len(trace) - 1
        assert not list(out.glob("seed_*/*_losses.csv"))

    def test_all_methods(self, tmp_path):
        out = tmp_path / "run"
        raw = tiny(out, snapshot_epochs=[2], snapshot_iters=[3], snapshot_count=2)
        cfg, _ = config_from_dict(raw)

        assert 0 == run_experiment(cfg)

        seed_dir = out / "seed_0"
        for label in ("proposed", "gain"):
            losses = read_rows(seed_dir / f"{label}_losses.csv")
            assert 3 == len(losses)
            evals = read_rows(seed_dir / f"{label}_eval.csv")
            assert list(EVAL_COLUMNS) == evals[0]
            assert ["1", "2"] == [r[0] for r in evals[1:]]
            assert (seed_dir / f"{label}_generator.gsnn").exists()
            with np.load(seed_dir / f"{label}_snapshots.npz") as npz:
                assert (2, 12) == npz["step_2"].shape
        with np.load(seed_dir / "gd_snapshots.npz") as npz:
            assert ["observed", "step_3", "truth"] == sorted(npz.files)

        resolved = json.loads((out / "resolved_config.json").read_text())
        proposed = dict(resolved["method_configs"]["proposed"])
        gain = dict(resolved["method_configs"]["gain"])
        assert 0.0 == gain.pop("beta")
        proposed.pop("beta")
        assert proposed == gain
        assert ["proposed", "gain", "gd"] == [r[0] for r in read_rows(out / "summary.csv")[1:]]

    def test_eval_every(self, tmp_path):
        out = tmp_path / "run"
        raw = tiny(out, methods=["gain"], eval_every=2)
        raw["gan"]["epochs"] = 5
        cfg, _ = config_from_dict(raw)

        run_experiment(cfg)

        assert ["2", "4"] == [r[0] for r in read_rows(out / "seed_0" / "gain_eval.csv")[1:]]

    def test_training_lowers_test_error(self, tmp_path):
        out = tmp_path / "run"
        raw = tiny(out, methods=["proposed"], eval_every=1)
        raw["data"] = {"n_nodes": 16, "k": 4, "r_train": 256, "r_test": 64}
        raw["gan"] = {
            "epochs": 40,
            "batch_size": 32,
            "hidden_widths": [32],
            "surrogate_temperature": 0.1,
            "lr_g": 0.002,
            "lr_d": 0.002,
        }
        cfg, _ = config_from_dict(raw)

        assert 0 == run_experiment(cfg)

        evals = read_rows(out / "seed_0" / "proposed_eval.csv")[1:]
        losses = read_rows(out / "seed_0" / "proposed_losses.csv")[1:]
        assert 40 == len(evals)
        assert float(evals[-1][3]) < float(evals[0][3])
        assert float(losses[-1][5]) < float(losses[0][5])

    def test_deterministic_summary(self, tmp_path):
        raw = tiny(tmp_path / "a", methods=["proposed", "gd"])
        run_experiment(config_from_dict(raw)[0])
        raw["out_dir"] = str(tmp_path / "b")
        run_experiment(config_from_dict(raw)[0])

        assert (tmp_path / "a" / "summary.csv").read_bytes() == (
            tmp_path / "b" / "summary.csv"
        ).read_bytes()

    def test_divergence_sets_exit_code(self, tmp_path):
        out = tmp_path / "run"
        raw = tiny(out, methods=["gd"])
        raw["gd"] = {"mu": 1e200, "beta": 1.0, "max_iters": 3}
        cfg, _ = config_from_dict(raw)

        with np.errstate(over="ignore", invalid="ignore"):
            assert 1 == run_experiment(cfg)

        assert 1 == len(read_rows(out / "summary.csv"))
        per_seed = read_rows(out / "per_seed.csv")
        assert "nan" == per_seed[1][2]


def test_gan_config_roundtrips_through_dict():
    cfg = GanConfig(alpha=3, hidden_widths=[5, 4])
    raw = asdict(cfg, filter=filters.exclude(fields(GanConfig).rng_seed))
    structured, _ = config_from_dict({"gan": raw})

    assert cfg == structured.gan
