"""Binary dataset (``.slcd``) and checkpoint (``.slcm``) files.

Both formats are little-endian, fixed-layout and contain no timestamps, so the
same inputs always produce the same bytes. Layouts are described with numpy
structured dtypes and written with ``tobytes``.
"""
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from soft_label_loc.codebook import CodeBook, CodeKind
from soft_label_loc.config import Strategy
from soft_label_loc.errors import FormatError
from soft_label_loc.geometry import RoomGrid
from soft_label_loc.model import ClassifierParams
from soft_label_loc.simulator import Dataset, Scene, Split

logger = logging.getLogger(__name__)

DATASET_MAGIC = b"SLCD"
CHECKPOINT_MAGIC = b"SLCM"
FORMAT_VERSION = 1

SPLIT_CODES = {Split.TRAIN: 0, Split.VALID: 1, Split.TEST: 2}
STRATEGY_CODES = {strategy: code for code, strategy in enumerate(Strategy)}
KIND_CODES = {kind: code for code, kind in enumerate(CodeKind)}

DATASET_HEADER = np.dtype([
    ("magic", "S4"),
    ("version", "<u2"),
    ("split", "u1"),
    ("pad", "u1"),
    ("seed", "<u4"),
    ("n", "<u4"),
    ("rows", "<u2"),
    ("cols", "<u2"),
    ("node_count", "<u4"),
    ("feature_dim", "<u4"),
    ("room_count", "<u4"),
    ("scene_count", "<u4"),
])

ROOM_RECORD = np.dtype([("length", "<f8"), ("width", "<f8")])

CHECKPOINT_HEADER = np.dtype([
    ("magic", "S4"),
    ("version", "<u2"),
    ("strategy", "u1"),
    ("has_accuracy", "u1"),
    ("dslc_kind", "u1"),
    ("pad", "S3"),
    ("n", "<u4"),
    ("feature_dim", "<u4"),
    ("hidden", "<u4"),
    ("seed", "<u4"),
    ("epoch", "<u4"),
    ("step", "<u8"),
    ("last_accuracy", "<f8"),
])

PathLike = Union[str, Path]


def scene_record(node_count: int, feature_dim: int) -> np.dtype:
    """Fixed-width record for one scene."""
    return np.dtype([
        ("room", "<u4"),
        ("source_area", "<u4"),
        ("source_point", "<f8", (2,)),
        ("node_areas", "<u4", (node_count,)),
        ("node_points", "<f8", (node_count, 2)),
        ("features", "<f8", (node_count, feature_dim)),
    ])


def summary_path(path: PathLike) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".summary.json")


def _read_header(data: bytes, dtype: np.dtype, magic: bytes, path: PathLike) -> np.void:
    if len(data) < dtype.itemsize:
        raise FormatError(f"{path}: truncated header ({len(data)} of {dtype.itemsize} bytes)")
    header = np.frombuffer(data, dtype=dtype, count=1)[0]
    if bytes(header["magic"]) != magic:
        raise FormatError(f"{path}: bad magic {bytes(header['magic'])!r}, expected {magic!r}")
    if int(header["version"]) != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format version {int(header['version'])}")
    return header


def _take(data: bytes, offset: int, dtype: np.dtype, count: int, what: str, path: PathLike):
    end = offset + dtype.itemsize * count
    if end > len(data):
        raise FormatError(f"{path}: truncated {what} (need {end} bytes, file has {len(data)})")
    return np.frombuffer(data, dtype=dtype, count=count, offset=offset).copy(), end


def dataset_summary(dataset: Dataset) -> dict:
    rooms = []
    for i, grid in enumerate(dataset.grids):
        rooms.append({
            "room": i,
            "length": round(grid.length, 6),
            "width": round(grid.width, 6),
            "scenes": int(np.sum(dataset.rooms == i)),
        })
    histogram = np.bincount(dataset.source_areas - 1, minlength=dataset.n)
    return {
        "split": dataset.split.value,
        "seed": dataset.seed,
        "scenes": len(dataset),
        "n": dataset.n,
        "rows": dataset.grids[0].rows,
        "cols": dataset.grids[0].cols,
        "node_count": dataset.node_count,
        "feature_dim": dataset.feature_dim,
        "rooms": rooms,
        "class_histogram": histogram.tolist(),
    }


def write_dataset(path: PathLike, dataset: Dataset) -> Path:
    """Write ``dataset`` and its JSON summary sidecar; returns the dataset path."""
    path = Path(path)
    first = dataset.grids[0]
    header = np.zeros(1, dtype=DATASET_HEADER)
    header[0] = (
        DATASET_MAGIC, FORMAT_VERSION, SPLIT_CODES[dataset.split], 0, dataset.seed, dataset.n,
        first.rows, first.cols, dataset.node_count, dataset.feature_dim, len(dataset.grids), len(dataset),
    )
    rooms = np.array([(g.length, g.width) for g in dataset.grids], dtype=ROOM_RECORD)

    records = np.zeros(len(dataset), dtype=scene_record(dataset.node_count, dataset.feature_dim))
    records["room"] = dataset.rooms
    records["source_area"] = dataset.source_areas
    records["source_point"] = dataset.source_points
    records["node_areas"] = dataset.node_areas
    records["node_points"] = np.stack([s.node_points for s in dataset.scenes])
    records["features"] = dataset.features

    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(header.tobytes() + rooms.tobytes() + records.tobytes())
    summary_path(path).write_text(json.dumps(dataset_summary(dataset), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info("wrote %d %s scenes to %s", len(dataset), dataset.split.value, path)
    return path


def read_dataset(path: PathLike) -> Dataset:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read dataset {path}: {exc.strerror or exc}") from exc
    header = _read_header(data, DATASET_HEADER, DATASET_MAGIC, path)
    try:
        split = {code: split for split, code in SPLIT_CODES.items()}[int(header["split"])]
    except KeyError:
        raise FormatError(f"{path}: unknown split code {int(header['split'])}") from None
    rows, cols = int(header["rows"]), int(header["cols"])
    if rows * cols != int(header["n"]) or int(header["room_count"]) < 1 or int(header["scene_count"]) < 1:
        raise FormatError(f"{path}: inconsistent header")

    room_table, offset = _take(data, DATASET_HEADER.itemsize, ROOM_RECORD, int(header["room_count"]), "room table", path)
    grids = [RoomGrid(length=float(r["length"]), width=float(r["width"]), rows=rows, cols=cols) for r in room_table]
    record = scene_record(int(header["node_count"]), int(header["feature_dim"]))
    records, end = _take(data, offset, record, int(header["scene_count"]), "scene records", path)
    if end != len(data):
        raise FormatError(f"{path}: {len(data) - end} trailing bytes")

    scenes = []
    for r in records:
        room = int(r["room"])
        if room >= len(grids):
            raise FormatError(f"{path}: scene refers to room {room} of {len(grids)}")
        scenes.append(Scene(
            grid=grids[room],
            room=room,
            source_area=int(r["source_area"]),
            source_point=np.array(r["source_point"], dtype=np.float64),
            node_areas=np.array(r["node_areas"], dtype=np.int64),
            node_points=np.array(r["node_points"], dtype=np.float64),
            features=np.array(r["features"], dtype=np.float64),
        ))
    return Dataset(scenes=scenes, grids=grids, split=split, seed=int(header["seed"]))


@dataclass
class Checkpoint:
    params: ClassifierParams
    strategy: Strategy
    epoch: int
    step: int
    m: np.ndarray
    v: np.ndarray
    dslc: CodeBook
    last_accuracy: Optional[float] = None


def write_checkpoint(path: PathLike, state) -> Path:
    """Serialise a TrainState: header, parameters, Adam moments, current DSLC codebook."""
    path = Path(path)
    params = state.params
    header = np.zeros(1, dtype=CHECKPOINT_HEADER)
    header[0] = (
        CHECKPOINT_MAGIC, FORMAT_VERSION, STRATEGY_CODES[state.strategy],
        int(state.last_accuracy is not None), KIND_CODES[state.dslc.kind], b"",
        params.n, params.feature_dim, params.hidden,
        params.seed, state.epoch, state.optimizer.t,
        0.0 if state.last_accuracy is None else state.last_accuracy,
    )
    payload = [
        header.tobytes(),
        params.flat.astype("<f8").tobytes(),
        state.optimizer.m.astype("<f8").tobytes(),
        state.optimizer.v.astype("<f8").tobytes(),
        state.dslc.matrix.astype("<f8").tobytes(),
    ]
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(b"".join(payload))
    logger.info("wrote checkpoint for epoch %d to %s", state.epoch, path)
    return path


def read_checkpoint(path: PathLike) -> Checkpoint:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read checkpoint {path}: {exc.strerror or exc}") from exc
    header = _read_header(data, CHECKPOINT_HEADER, CHECKPOINT_MAGIC, path)
    strategies = list(Strategy)
    if int(header["strategy"]) >= len(strategies):
        raise FormatError(f"{path}: unknown strategy code {int(header['strategy'])}")
    kinds = list(CodeKind)
    if int(header["dslc_kind"]) >= len(kinds):
        raise FormatError(f"{path}: unknown codebook kind code {int(header['dslc_kind'])}")
    n, feature_dim, hidden = int(header["n"]), int(header["feature_dim"]), int(header["hidden"])
    size = ClassifierParams.expected_size(n, feature_dim, hidden)

    f8 = np.dtype("<f8")
    flat, offset = _take(data, CHECKPOINT_HEADER.itemsize, f8, size, "parameters", path)
    m, offset = _take(data, offset, f8, size, "Adam first moment", path)
    v, offset = _take(data, offset, f8, size, "Adam second moment", path)
    dslc, end = _take(data, offset, f8, n * n, "DSLC codebook", path)
    if end != len(data):
        raise FormatError(f"{path}: {len(data) - end} trailing bytes")

    return Checkpoint(
        params=ClassifierParams(flat.astype(np.float64), n, feature_dim, hidden, int(header["seed"])),
        strategy=strategies[int(header["strategy"])],
        epoch=int(header["epoch"]),
        step=int(header["step"]),
        m=m.astype(np.float64),
        v=v.astype(np.float64),
        dslc=CodeBook(dslc.reshape(n, n).astype(np.float64), kinds[int(header["dslc_kind"])]),
        last_accuracy=float(header["last_accuracy"]) if header["has_accuracy"] else None,
    )
