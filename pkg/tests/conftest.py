"""Test configuration and shared fixtures."""
import pytest

from soft_label_loc.config import SimConfig, Strategy, TrainConfig
from soft_label_loc.database import ResultsDatabase
from soft_label_loc.geometry import RoomGrid
from soft_label_loc.simulator import Split, generate_dataset, sample_rooms
from soft_label_loc.training import fit


TINY_CONFIG = """\
version: 1
seed: 11
out_dir: {out_dir}
simulation:
  rows: 4
  cols: 4
  room_bounds: [4.0, 6.0]
  train_rooms: 2
  test_rooms: 1
  splits: {{train: 48, valid: 16, test: 16}}
  scene: {{node_count: 4, feature_dim: 2}}
training:
  strategy: DSLC_SSLC_CONST
  epochs: 2
  batch_size: 16
  hidden: 8
evaluation: {{ub_samples: 2000}}
compare: {{seeds: 1}}
sweep: {{param: alpha_s, values: [2.6, 3.0]}}
"""


@pytest.fixture
def test_db():
    """Create a test database in memory."""
    db = ResultsDatabase(":memory:")
    yield db
    db.close()


@pytest.fixture
def small_grid():
    """4 x 4 grid over a 4 m square room (1 m cells)."""
    return RoomGrid(length=4.0, width=4.0, rows=4, cols=4)


@pytest.fixture
def desk_grid():
    """8 x 8 grid over a 6 m square room."""
    return RoomGrid(length=6.0, width=6.0, rows=8, cols=8)


@pytest.fixture
def sim_cfg():
    return SimConfig(node_count=4, feature_dim=2)


@pytest.fixture
def tiny_datasets(sim_cfg):
    """(train, valid, test) on 4 x 4 grids; test uses a held-out room."""
    train_rooms = sample_rooms(2, (4.0, 6.0), (4, 4), seed=1)
    test_rooms = sample_rooms(1, (4.0, 6.0), (4, 4), seed=2)
    train = generate_dataset(train_rooms, sim_cfg, 48, Split.TRAIN, seed=3)
    valid = generate_dataset(train_rooms, sim_cfg, 16, Split.VALID, seed=4)
    test = generate_dataset(test_rooms, sim_cfg, 16, Split.TEST, seed=5)
    return train, valid, test


@pytest.fixture
def train_cfg():
    return TrainConfig(strategy=Strategy.DSLC_SSLC_CONST, epochs=2, batch_size=16, hidden=8, seed=7)


@pytest.fixture
def trained_state(train_cfg, tiny_datasets):
    """A two-epoch DSLC+SSLC model on the tiny datasets."""
    train, valid, _ = tiny_datasets
    return fit(train_cfg, train, valid)


@pytest.fixture
def config_file(tmp_path):
    """Tiny experiment config writing its runs under ``tmp_path/runs``."""
    path = tmp_path / "experiment.yaml"
    path.write_text(TINY_CONFIG.format(out_dir=tmp_path / "runs"), encoding="utf-8")
    return path
