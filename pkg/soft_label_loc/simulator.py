"""Seeded synthetic localization scenes.

Each scene places a source in one local area and ``node_count`` single-microphone
nodes in other, distinct areas. A node observes ``feature_dim / 2`` noisy frames
of [propagation delay, attenuation] relative to the source; its position enters
the model only through the one-hot code of its area.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from soft_label_loc.config import SimConfig, derive_seed
from soft_label_loc.errors import DimensionMismatchError, EmptyInputError, InvalidConfigurationError
from soft_label_loc.geometry import AreaIndex, Point2D, RoomGrid, area_centers

logger = logging.getLogger(__name__)

# Delays are fed to the model in units of 10 ms so they sit near attenuation's range.
DELAY_SCALE = 100.0


class Split(str, Enum):
    TRAIN = "TRAIN"
    VALID = "VALID"
    TEST = "TEST"


class Node(NamedTuple):
    area: AreaIndex
    point: Point2D
    feature: np.ndarray


@dataclass
class Scene:
    """One utterance-equivalent sample."""
    grid: RoomGrid
    room: int
    source_area: AreaIndex
    source_point: np.ndarray
    node_areas: np.ndarray
    node_points: np.ndarray
    features: np.ndarray

    @property
    def nodes(self) -> List[Node]:
        return [
            Node(int(a), Point2D(float(p[0]), float(p[1])), f)
            for a, p, f in zip(self.node_areas, self.node_points, self.features)
        ]


@dataclass
class Dataset:
    """Scenes of one split; ``scene.room`` indexes into ``grids``."""
    scenes: List[Scene]
    grids: List[RoomGrid]
    split: Split
    seed: int
    node_count: int = field(init=False)
    feature_dim: int = field(init=False)

    def __post_init__(self):
        if not self.scenes:
            raise EmptyInputError("a dataset needs at least one scene")
        first = self.scenes[0]
        self.node_count = int(first.node_areas.shape[0])
        self.feature_dim = int(first.features.shape[1])
        for i, scene in enumerate(self.scenes):
            shape = (int(scene.node_areas.shape[0]), int(scene.features.shape[1]))
            if shape != (self.node_count, self.feature_dim):
                raise DimensionMismatchError(f"scene {i} (node_count, feature_dim)", (self.node_count, self.feature_dim), shape)

    def __len__(self) -> int:
        return len(self.scenes)

    @property
    def n(self) -> int:
        return self.grids[0].n

    @cached_property
    def source_areas(self) -> np.ndarray:
        return np.array([s.source_area for s in self.scenes], dtype=np.int64)

    @cached_property
    def rooms(self) -> np.ndarray:
        return np.array([s.room for s in self.scenes], dtype=np.int64)

    @cached_property
    def source_points(self) -> np.ndarray:
        return np.stack([s.source_point for s in self.scenes])

    @cached_property
    def node_areas(self) -> np.ndarray:
        return np.stack([s.node_areas for s in self.scenes]).astype(np.int64)

    @cached_property
    def features(self) -> np.ndarray:
        return np.stack([s.features for s in self.scenes])


def sample_rooms(count: int, bounds: Tuple[float, float], grid_shape: Tuple[int, int], seed: int) -> List[RoomGrid]:
    """Rooms with length and width drawn uniformly from ``bounds``."""
    if count < 1:
        raise EmptyInputError("sample_rooms needs count >= 1")
    low, high = bounds
    if not 0.0 < low <= high:
        raise InvalidConfigurationError(f"empty room size range [{low}, {high}]")
    rows, cols = grid_shape
    rng = np.random.default_rng(seed)
    sizes = rng.uniform(low, high, size=(count, 2))
    return [RoomGrid(length=float(l), width=float(w), rows=rows, cols=cols) for l, w in sizes]


def _points_in_cells(grid: RoomGrid, areas: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    rows, cols = np.divmod(areas - 1, grid.cols)
    u = rng.random((areas.shape[0], 2))
    return np.column_stack([(cols + u[:, 0]) * grid.cell_width, (rows + u[:, 1]) * grid.cell_height])


def synthesize_scene(grid: RoomGrid, cfg: SimConfig, seed: int, room: int = 0) -> Scene:
    if cfg.node_count > grid.n - 1:
        raise InvalidConfigurationError(
            f"node_count={cfg.node_count} exceeds the {grid.n - 1} areas left beside the source"
        )
    rng = np.random.default_rng(seed)
    source_area = int(rng.integers(1, grid.n + 1))
    source_point = _points_in_cells(grid, np.array([source_area]), rng)[0]

    candidates = np.delete(np.arange(1, grid.n + 1), source_area - 1)
    node_areas = rng.choice(candidates, size=cfg.node_count, replace=False)
    node_points = _points_in_cells(grid, node_areas, rng)

    distance = np.linalg.norm(node_points - source_point, axis=1)
    frames = []
    for _ in range(cfg.frames):
        delay = (
            distance / cfg.speed_of_sound
            + cfg.noise_std * rng.standard_normal(cfg.node_count)
            + cfg.reverb_blur * rng.random(cfg.node_count)
        )
        attenuation = 1.0 / (1.0 + distance) + cfg.noise_std * rng.standard_normal(cfg.node_count)
        frames.extend([delay, attenuation])

    return Scene(
        grid=grid,
        room=room,
        source_area=source_area,
        source_point=source_point,
        node_areas=node_areas.astype(np.int64),
        node_points=node_points,
        features=np.column_stack(frames),
    )


def generate_dataset(rooms: Sequence[RoomGrid], cfg: SimConfig, count: int, split: Split, seed: int) -> Dataset:
    """``count`` scenes; scene ``i`` picks its room and content from seeds derived from (seed, i)."""
    if not rooms:
        raise EmptyInputError("generate_dataset needs at least one room")
    if count < 1:
        raise EmptyInputError("generate_dataset needs count >= 1")
    scenes = []
    for i in range(count):
        room = int(np.random.default_rng(derive_seed(seed, "room", i)).integers(len(rooms)))
        scenes.append(synthesize_scene(rooms[room], cfg, derive_seed(seed, "scene", i), room=room))
    logger.info("generated %d %s scenes over %d rooms", count, split.value, len(rooms))
    return Dataset(scenes=scenes, grids=list(rooms), split=split, seed=seed)


def encode_model_input(scene: Scene, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """(node_count, n + feature_dim) rows: one-hot area code followed by the acoustic features.

    When ``rng`` is given the node rows are shuffled; node order carries no information.
    """
    n = scene.grid.n
    one_hot = np.zeros((scene.node_areas.shape[0], n))
    one_hot[np.arange(scene.node_areas.shape[0]), scene.node_areas - 1] = 1.0
    rows = np.concatenate([one_hot, _scale_features(scene.features)], axis=1)
    if rng is not None:
        rows = rows[rng.permutation(rows.shape[0])]
    return rows


def _scale_features(features: np.ndarray) -> np.ndarray:
    scaled = np.array(features, dtype=np.float64, copy=True)
    scaled[..., 0::2] *= DELAY_SCALE
    return scaled


def encode_batch(dataset: Dataset, indices: np.ndarray, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """(B, node_count, n + feature_dim) model inputs for the scenes at ``indices``."""
    indices = np.asarray(indices, dtype=np.int64)
    node_areas = dataset.node_areas[indices]
    batch, nodes = node_areas.shape
    one_hot = np.zeros((batch, nodes, dataset.n))
    np.put_along_axis(one_hot, (node_areas - 1)[..., None], 1.0, axis=2)
    inputs = np.concatenate([one_hot, _scale_features(dataset.features[indices])], axis=2)
    if rng is not None:
        order = np.argsort(rng.random((batch, nodes)), axis=1)
        inputs = np.take_along_axis(inputs, order[..., None], axis=1)
    return inputs


def encode_dataset(dataset: Dataset, seed: Optional[int] = None) -> np.ndarray:
    rng = np.random.default_rng(seed) if seed is not None else None
    return encode_batch(dataset, np.arange(len(dataset)), rng)


def nearest_node_baseline(dataset: Dataset) -> np.ndarray:
    """Predict the area of the node with the largest mean attenuation.

    Nodes never share the source's area, so this baseline's ACC is always 0;
    it is a distance baseline, judged by MAE.
    """
    attenuation = dataset.features[..., 1::2].mean(axis=2)
    loudest = np.argmax(attenuation, axis=1)
    return dataset.node_areas[np.arange(len(dataset)), loudest]


def random_guess_mae(dataset: Dataset) -> float:
    """Expected MAE of guessing an area uniformly at random."""
    total = 0.0
    for scene in dataset.scenes:
        centers = area_centers(scene.grid)
        total += float(np.mean(np.linalg.norm(centers - scene.source_point, axis=1)))
    return total / len(dataset)
