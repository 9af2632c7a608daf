"""Tests for the command-line entry point."""
import json

import pytest

from soft_label_loc import cli
from soft_label_loc.config import load_config, run_directory
from soft_label_loc.database import ResultsDatabase
from soft_label_loc.storage import read_dataset, write_checkpoint
from soft_label_loc.training import fit

from tests.conftest import TINY_CONFIG


def _run(config_file, *args):
    command, *rest = args
    return cli.main([command, "--config", str(config_file), *rest])


def _run_dir(config_file):
    return run_directory(load_config(config_file))


class TestSimulate:
    """Test dataset generation through the CLI."""

    def test_writes_three_splits(self, config_file):
        """Test train/valid/test files, summaries and the resolved config."""
        assert _run(config_file, "simulate") == cli.EXIT_OK
        run = _run_dir(config_file)
        for name, count in [("train", 48), ("valid", 16), ("test", 16)]:
            assert len(read_dataset(run / "data" / f"{name}.slcd")) == count
            assert (run / "data" / f"{name}.slcd.summary.json").exists()
        assert (run / "config.yaml").exists()

    def test_test_rooms_are_held_out(self, config_file):
        """Test the test split uses rooms that training never sees."""
        _run(config_file, "simulate")
        run = _run_dir(config_file)
        train = read_dataset(run / "data" / "train.slcd")
        test = read_dataset(run / "data" / "test.slcd")
        assert len(train.grids) == 2 and len(test.grids) == 1
        assert test.grids[0] not in train.grids

    def test_byte_identical(self, config_file):
        """Test re-running simulate reproduces every byte."""
        _run(config_file, "simulate")
        run = _run_dir(config_file)
        first = {p.name: p.read_bytes() for p in (run / "data").iterdir()}
        _run(config_file, "simulate")
        second = {p.name: p.read_bytes() for p in (run / "data").iterdir()}
        assert first == second

    def test_seed_override_changes_run(self, config_file):
        """Test --seed-override moves the run to another directory."""
        _run(config_file, "simulate", "--seed-override", "12")
        cfg = load_config(config_file).model_copy(update={"seed": 12})
        assert (run_directory(cfg) / "data" / "train.slcd").exists()
        assert not _run_dir(config_file).exists()

    def test_too_many_nodes_writes_nothing(self, tmp_path):
        """Test an impossible node count exits 2 before creating the run."""
        path = tmp_path / "bad.yaml"
        path.write_text(TINY_CONFIG.format(out_dir=tmp_path / "runs").replace("node_count: 4", "node_count: 16"))
        assert cli.main(["simulate", "--config", str(path)]) == cli.EXIT_VALIDATION
        assert not (tmp_path / "runs").exists()


class TestTrainAndEval:
    """Test training, resuming and evaluation through the CLI."""

    def test_train_then_eval(self, config_file, capsys):
        """Test the checkpoint, history and report files."""
        _run(config_file, "simulate")
        assert _run(config_file, "train") == cli.EXIT_OK
        assert _run(config_file, "eval") == cli.EXIT_OK
        out_dir = _run_dir(config_file) / "DSLC_SSLC_CONST"
        for name in ("checkpoint.slcm", "history.tsv", "report.tsv", "report.json"):
            assert (out_dir / name).exists()
        assert "average" in capsys.readouterr().out

    def test_reruns_are_byte_identical(self, config_file):
        """Test train and eval reproduce their payloads."""
        _run(config_file, "simulate")
        out_dir = _run_dir(config_file) / "DSLC_SSLC_CONST"
        _run(config_file, "train")
        _run(config_file, "eval")
        first = {n: (out_dir / n).read_bytes() for n in ("checkpoint.slcm", "history.tsv", "report.tsv", "report.json")}
        _run(config_file, "train")
        _run(config_file, "eval")
        second = {n: (out_dir / n).read_bytes() for n in first}
        assert first == second

    def test_resume_continues_from_checkpoint(self, config_file):
        """Test --resume after one stored epoch ends with the uninterrupted checkpoint."""
        _run(config_file, "simulate")
        run = _run_dir(config_file)
        out_dir = run / "DSLC_SSLC_CONST"
        _run(config_file, "train")
        full = (out_dir / "checkpoint.slcm").read_bytes()

        cfg = load_config(config_file)
        train_cfg = cfg.train_config(epochs=1)
        train = read_dataset(run / "data" / "train.slcd")
        valid = read_dataset(run / "data" / "valid.slcd")
        write_checkpoint(out_dir / "checkpoint.slcm", fit(train_cfg, train, valid))
        (out_dir / "history.tsv").unlink()

        assert _run(config_file, "train", "--resume") == cli.EXIT_OK
        assert (out_dir / "checkpoint.slcm").read_bytes() == full

    def test_results_db(self, config_file):
        """Test the run index records history and evaluation rows."""
        _run(config_file, "simulate")
        _run(config_file, "train")
        _run(config_file, "eval")
        run = _run_dir(config_file)
        with ResultsDatabase(str(run / "results.db")) as db:
            assert len(db.get_history(run.name)) == 2
            assert db.get_eval_rows(run.name)[-1]["room"] == "average"

    def test_train_without_data(self, config_file, capsys):
        """Test training before simulate is a runtime error."""
        assert _run(config_file, "train") == cli.EXIT_RUNTIME
        assert "simulate" in capsys.readouterr().err

    def test_eval_dimension_mismatch(self, config_file, tmp_path, capsys):
        """Test evaluating on a dataset for another grid exits 2 and names both sizes."""
        _run(config_file, "simulate")
        _run(config_file, "train")
        other = tmp_path / "other.yaml"
        other.write_text(
            TINY_CONFIG.format(out_dir=tmp_path / "other-runs").replace("rows: 4", "rows: 3").replace("cols: 4", "cols: 3")
        )
        cli.main(["simulate", "--config", str(other)])
        foreign = run_directory(load_config(other)) / "data" / "test.slcd"
        capsys.readouterr()
        assert _run(config_file, "eval", "--dataset", str(foreign)) == cli.EXIT_VALIDATION
        err = capsys.readouterr().err
        assert "(16, 2)" in err and "(9, 2)" in err


class TestSweepAndCompare:
    """Test the multi-run commands."""

    def test_sweep(self, config_file, capsys):
        """Test a two-value alpha_s sweep writes its table."""
        _run(config_file, "simulate")
        capsys.readouterr()
        assert _run(config_file, "sweep", "--param", "alpha_s", "--values", "2.6,3.0") == cli.EXIT_OK
        table = (_run_dir(config_file) / "sweep-alpha_s.tsv").read_text()
        assert len(table.splitlines()) == 3
        assert capsys.readouterr().out == table

    def test_compare(self, config_file):
        """Test all six strategies appear in every table, per room and on average."""
        _run(config_file, "simulate")
        assert _run(config_file, "compare") == cli.EXIT_OK
        run = _run_dir(config_file)
        decomposition = (run / "learning_error.tsv").read_text().splitlines()
        assert len(decomposition) == 1 + 6 * 2
        assert [line.split("\t")[1] for line in decomposition[1:3]] == ["0", "average"]
        assert len((run / "compare.tsv").read_text().splitlines()) == 1 + 6 * 2
        payload = json.loads((run / "compare.json").read_text())["strategies"]
        assert len(payload) == 6
        assert set(payload["ONE_HOT"]) == {"rooms", "average"}
        assert set(payload["ONE_HOT"]["rooms"]) == {"0"}


class TestUsage:
    """Test usage errors and exit codes."""

    def test_missing_config_flag(self):
        """Test a missing required flag exits 1."""
        with pytest.raises(SystemExit) as excinfo:
            cli.main(["train"])
        assert excinfo.value.code == cli.EXIT_USAGE

    def test_unknown_command(self):
        """Test an unknown subcommand exits 1."""
        with pytest.raises(SystemExit) as excinfo:
            cli.main(["fly"])
        assert excinfo.value.code == cli.EXIT_USAGE

    def test_bad_values(self, config_file):
        """Test non-numeric sweep values exit 1."""
        _run(config_file, "simulate")
        assert _run(config_file, "sweep", "--values", "a,b") == cli.EXIT_USAGE

    def test_invalid_config(self, tmp_path, capsys):
        """Test config validation errors exit 2 with the line number."""
        path = tmp_path / "bad.yaml"
        path.write_text("training:\n  alpha_d: 2\n")
        assert cli.main(["simulate", "--config", str(path)]) == cli.EXIT_VALIDATION
        assert f"{path}:2:" in capsys.readouterr().err
