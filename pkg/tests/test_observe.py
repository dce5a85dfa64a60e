# SPDX-License-Identifier: MIT

from typing import NamedTuple

import numpy as np
import pytest

from gsimpute.exceptions import (
    BadMagic,
    DimensionMismatch,
    InvalidEntry,
    InvalidProbability,
    TruncatedFile,
)
from gsimpute.observe import (
    Observation,
    apply_mask,
    infer_mask,
    observe,
    quantize,
    read_observations,
    sample_mask,
    sample_masks,
    write_observations,
)


class Case(NamedTuple):
    """
    A signal, a mask and the signed observation they produce.
    """

    name: str
    x: tuple
    mask: tuple
    signed: tuple


CASES = [
    Case("mixed", (0.3, -2.0, 0.0, -0.1), (1, 1, 1, 0), (1, -1, 1, 0)),
    Case("all_hidden", (1.0, -1.0, 2.0), (0, 0, 0), (0, 0, 0)),
    Case("all_seen", (-1.0, -1e-300, 5.0), (1, 1, 1), (-1, -1, 1)),
]


class TestObservationModel:
    @pytest.mark.parametrize("case", CASES, ids=[c.name for c in CASES])
    def test_observe(self, case):
        obs = observe(case.x, case.mask)

        assert case.signed == tuple(obs.signed)
        assert case.mask == tuple(obs.mask)

    def test_zero_quantizes_to_plus_one(self):
        assert [1, 1, -1] == quantize([0.0, -0.0, -1e-9]).tolist()

    def test_apply_mask_shapes(self):
        with pytest.raises(DimensionMismatch):
            apply_mask([1, -1, 1], [1, 0])

    def test_inconsistent_observation(self):
        with pytest.raises(ValueError):
            Observation([1, 0], [1, 1])
        with pytest.raises(ValueError):
            Observation([1, 0], [0, 0])
        with pytest.raises(DimensionMismatch):
            Observation([1, 0], [1, 0, 0])

    def test_entries_checked(self):
        with pytest.raises(ValueError):
            Observation([2, 0], [1, 0])
        with pytest.raises(ValueError):
            Observation([1, 1], [1, -0.5])

    def test_stacked_indexing(self):
        x = np.array([[1.0, -1.0], [-3.0, 2.0], [0.5, 0.5]])
        m = np.array([[1, 0], [1, 1], [0, 1]])
        obs = observe(x, m)

        assert 3 == len(obs)
        assert 2 == obs.n_nodes
        assert Observation([1, 1], [-1, 1]) == obs[1]
        assert 2 == len(obs[1:])

    def test_single_is_not_indexable(self):
        obs = observe([1.0], [1])

        assert 1 == len(obs)
        with pytest.raises(TypeError):
            obs[0]

    def test_immutable(self):
        obs = observe([1.0, -1.0], [1, 1])

        with pytest.raises(ValueError):
            obs.signed[0] = -1


class TestInferMask:
    def test_roundtrip(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(10_000, 8))
        m = (rng.random((10_000, 8)) < 0.4).astype(np.int8)

        assert np.array_equal(m, infer_mask(observe(x, m).signed))

    @pytest.mark.parametrize("bad", [[0, 2], [-1, 0.5], [-2]])
    def test_invalid_entry(self, bad):
        with pytest.raises(InvalidEntry):
            infer_mask(bad)


class TestSampling:
    def test_deterministic(self):
        assert np.array_equal(sample_mask(100, 0.3, 11), sample_mask(100, 0.3, 11))
        assert not np.array_equal(sample_mask(100, 0.3, 11), sample_mask(100, 0.3, 12))

    def test_fraction(self):
        masks = sample_masks(100, 100, 0.5, 0)

        assert masks.shape == (100, 100)
        assert abs(masks.mean() - 0.5) <= 0.02

    def test_p_one_observes_everything(self):
        assert sample_mask(50, 1.0, 3).all()

    def test_rows_regenerate_in_isolation(self):
        masks = sample_masks(5, 20, 0.5, 40)

        assert np.array_equal(masks[3], sample_mask(20, 0.5, 43))

    @pytest.mark.parametrize("p", [0.0, -0.1, 1.5])
    def test_invalid_probability(self, p):
        with pytest.raises(InvalidProbability):
            sample_mask(10, p, 0)
        with pytest.raises(InvalidProbability):
            sample_masks(2, 10, p, 0)


class TestObservationFile:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(1)
        obs = observe(rng.normal(size=(7, 9)), rng.random((7, 9)) < 0.5)
        path = tmp_path / "obs.gsob"
        write_observations(path, obs)

        assert obs == read_observations(path)

    def test_layout(self, tmp_path):
        path = tmp_path / "obs.gsob"
        write_observations(path, observe([[1.0, -1.0, 2.0]], [[1, 1, 0]]))

        assert (
            b"GSOB1" + b"\x03\x00\x00\x00" + b"\x01\x00\x00\x00" + b"\x01\xff\x00"
            == path.read_bytes()
        )

    def test_single_written_as_one_record(self, tmp_path):
        path = tmp_path / "one.gsob"
        write_observations(path, observe([1.0, -1.0], [1, 1]))

        assert (1, 2) == read_observations(path).mask.shape

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "x.gsob"
        path.write_bytes(b"GSGT1" + bytes(8))

        with pytest.raises(BadMagic):
            read_observations(path)

    @pytest.mark.parametrize("payload", [b"\x02\x00", b"\x02\x00\x00\x00\x02\x00\x00\x00\x01"])
    def test_truncated(self, tmp_path, payload):
        path = tmp_path / "short.gsob"
        path.write_bytes(b"GSOB1" + payload)

        with pytest.raises(TruncatedFile):
            read_observations(path)

    def test_invalid_byte(self, tmp_path):
        path = tmp_path / "bad.gsob"
        path.write_bytes(b"GSOB1" + b"\x01\x00\x00\x00\x01\x00\x00\x00\x05")

        with pytest.raises(InvalidEntry):
            read_observations(path)
