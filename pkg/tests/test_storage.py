"""Tests for the binary dataset and checkpoint files."""
import json

import numpy as np
import pytest

from soft_label_loc.codebook import CodeKind
from soft_label_loc.config import Strategy, TrainConfig
from soft_label_loc.errors import FormatError
from soft_label_loc.storage import (
    CHECKPOINT_HEADER,
    read_checkpoint,
    read_dataset,
    summary_path,
    write_checkpoint,
    write_dataset,
)
from soft_label_loc.training import fit


class TestDatasetFile:
    """Test .slcd files."""

    def test_lossless(self, tiny_datasets, tmp_path):
        """Test reading back gives the same scenes and rooms."""
        train, _, _ = tiny_datasets
        path = write_dataset(tmp_path / "train.slcd", train)
        loaded = read_dataset(path)
        assert loaded.split == train.split and loaded.seed == train.seed
        assert loaded.grids == train.grids
        assert np.array_equal(loaded.features, train.features)
        assert np.array_equal(loaded.node_areas, train.node_areas)
        assert np.array_equal(loaded.source_points, train.source_points)
        assert np.array_equal(loaded.rooms, train.rooms)
        assert np.array_equal(loaded.source_areas, train.source_areas)

    def test_byte_identical_rewrite(self, tiny_datasets, tmp_path):
        """Test writing the same dataset twice gives the same bytes."""
        _, _, test = tiny_datasets
        a = write_dataset(tmp_path / "a.slcd", test)
        b = write_dataset(tmp_path / "b.slcd", test)
        assert a.read_bytes() == b.read_bytes()
        assert summary_path(a).read_bytes() == summary_path(b).read_bytes()

    def test_summary(self, tiny_datasets, tmp_path):
        """Test the sidecar lists counts, rooms and the class histogram."""
        train, _, _ = tiny_datasets
        path = write_dataset(tmp_path / "train.slcd", train)
        summary = json.loads(summary_path(path).read_text())
        assert summary["split"] == "TRAIN"
        assert summary["scenes"] == 48
        assert sum(r["scenes"] for r in summary["rooms"]) == 48
        assert sum(summary["class_histogram"]) == 48
        assert len(summary["class_histogram"]) == 16

    def test_bad_magic(self, tiny_datasets, tmp_path):
        """Test a file with the wrong magic."""
        _, _, test = tiny_datasets
        path = write_dataset(tmp_path / "t.slcd", test)
        data = bytearray(path.read_bytes())
        data[:4] = b"XXXX"
        path.write_bytes(bytes(data))
        with pytest.raises(FormatError, match="magic"):
            read_dataset(path)

    def test_truncated(self, tiny_datasets, tmp_path):
        """Test a file cut short."""
        _, _, test = tiny_datasets
        path = write_dataset(tmp_path / "t.slcd", test)
        path.write_bytes(path.read_bytes()[:-10])
        with pytest.raises(FormatError, match="truncated"):
            read_dataset(path)

    def test_trailing_bytes(self, tiny_datasets, tmp_path):
        """Test extra bytes after the last record."""
        _, _, test = tiny_datasets
        path = write_dataset(tmp_path / "t.slcd", test)
        path.write_bytes(path.read_bytes() + b"\0")
        with pytest.raises(FormatError, match="trailing"):
            read_dataset(path)

    def test_checkpoint_is_not_a_dataset(self, trained_state, tmp_path):
        """Test a checkpoint fed to the dataset reader."""
        path = write_checkpoint(tmp_path / "m.slcm", trained_state)
        with pytest.raises(FormatError):
            read_dataset(path)

    def test_missing(self, tmp_path):
        """Test a missing file."""
        with pytest.raises(FormatError, match="cannot read"):
            read_dataset(tmp_path / "none.slcd")


class TestCheckpointFile:
    """Test .slcm files."""

    def test_lossless(self, trained_state, tmp_path):
        """Test every stored field survives the round trip."""
        ckpt = read_checkpoint(write_checkpoint(tmp_path / "m.slcm", trained_state))
        assert ckpt.strategy is Strategy.DSLC_SSLC_CONST
        assert ckpt.epoch == 2
        assert ckpt.step == trained_state.optimizer.t
        assert ckpt.last_accuracy == trained_state.last_accuracy
        assert np.array_equal(ckpt.params.flat, trained_state.params.flat)
        assert np.array_equal(ckpt.m, trained_state.optimizer.m)
        assert np.array_equal(ckpt.v, trained_state.optimizer.v)
        assert np.array_equal(ckpt.dslc.matrix, trained_state.dslc.matrix)
        assert (ckpt.params.n, ckpt.params.feature_dim, ckpt.params.hidden) == (16, 2, 8)

    def test_parameters_follow_header(self, trained_state, tmp_path):
        """Test the flat parameter array starts right after the header."""
        data = write_checkpoint(tmp_path / "m.slcm", trained_state).read_bytes()
        flat = np.frombuffer(data, dtype="<f8", count=trained_state.params.size, offset=CHECKPOINT_HEADER.itemsize)
        assert np.array_equal(flat, trained_state.params.flat)

    def test_byte_identical_rewrite(self, trained_state, tmp_path):
        """Test the same state always gives the same bytes."""
        a = write_checkpoint(tmp_path / "a.slcm", trained_state).read_bytes()
        b = write_checkpoint(tmp_path / "b.slcm", trained_state).read_bytes()
        assert a == b

    def test_truncated(self, trained_state, tmp_path):
        """Test a checkpoint missing its DSLC codebook."""
        path = write_checkpoint(tmp_path / "m.slcm", trained_state)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(FormatError, match="DSLC"):
            read_checkpoint(path)

    def test_dataset_is_not_a_checkpoint(self, tiny_datasets, tmp_path):
        """Test a dataset fed to the checkpoint reader."""
        path = write_dataset(tmp_path / "t.slcd", tiny_datasets[2])
        with pytest.raises(FormatError, match="magic"):
            read_checkpoint(path)

    def test_codebook_kind_survives(self, trained_state, tiny_datasets, tmp_path):
        """Test the stored codebook keeps its kind: DSLC after updates, SMOOTHED when never updated."""
        assert read_checkpoint(write_checkpoint(tmp_path / "d.slcm", trained_state)).dslc.kind is CodeKind.DSLC
        train, valid, _ = tiny_datasets
        cfg = TrainConfig(strategy=Strategy.ONE_HOT, epochs=1, batch_size=16, hidden=8, seed=7)
        ckpt = read_checkpoint(write_checkpoint(tmp_path / "o.slcm", fit(cfg, train, valid)))
        assert ckpt.dslc.kind is CodeKind.SMOOTHED

    def test_unknown_codebook_kind(self, trained_state, tmp_path):
        """Test a header with an out-of-range codebook kind."""
        path = write_checkpoint(tmp_path / "m.slcm", trained_state)
        data = bytearray(path.read_bytes())
        data[CHECKPOINT_HEADER.fields["dslc_kind"][1]] = 200
        path.write_bytes(bytes(data))
        with pytest.raises(FormatError, match="codebook kind"):
            read_checkpoint(path)
