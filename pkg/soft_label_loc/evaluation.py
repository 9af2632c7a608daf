"""Localization metrics and experiment reports.

MAE is measured from the true continuous source position to the center of the
predicted local area. UB-MAE is the MAE a perfect classifier would still incur
because it can only answer with area centers; learning error = MAE - UB-MAE.
"""
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import TYPE_CHECKING, Dict, List, Optional, Sequence, Union

import numpy as np

from soft_label_loc.config import Strategy, TrainConfig, derive_seed
from soft_label_loc.errors import DimensionMismatchError, EmptyInputError, InvalidConfigurationError
from soft_label_loc.geometry import AreaIndex, RoomGrid, area_center, quantization_upper_bound
from soft_label_loc.model import ClassifierParams, predict
from soft_label_loc.simulator import Dataset, Scene, encode_batch

if TYPE_CHECKING:
    from soft_label_loc.storage import Checkpoint
    from soft_label_loc.training import TrainState

logger = logging.getLogger(__name__)

PREDICT_CHUNK = 512


@lru_cache(maxsize=1024)
def _room_bound(grid: RoomGrid, samples: int, seed: int) -> float:
    return quantization_upper_bound(grid, samples, seed)


@dataclass
class RoomMetrics:
    """One report row; ``room`` is None for the aggregate row."""
    room: Optional[int]
    count: int
    mae: float
    acc: float
    ub_mae: float

    @property
    def learning_error(self) -> float:
        return learning_error(self.mae, self.ub_mae)


@dataclass
class EvalReport:
    strategy: str
    rooms: List[RoomMetrics]
    aggregate: RoomMetrics
    predictions: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0, dtype=np.int64))


@dataclass
class SweepRow:
    value: float
    strategy: Strategy
    report: EvalReport

    @property
    def mae(self) -> float:
        return self.report.aggregate.mae

    @property
    def acc(self) -> float:
        return self.report.aggregate.acc


def _check_pair(predictions: Sequence[AreaIndex], scenes: Sequence[Scene]) -> None:
    if len(predictions) != len(scenes):
        raise DimensionMismatchError("prediction count", len(scenes), len(predictions))
    if len(scenes) == 0:
        raise EmptyInputError("metrics need at least one scene")


def localization_errors(predictions: Sequence[AreaIndex], scenes: Sequence[Scene]) -> np.ndarray:
    """Per-scene distance from the true source point to the predicted area's center."""
    _check_pair(predictions, scenes)
    out = np.empty(len(scenes))
    for i, (k, scene) in enumerate(zip(predictions, scenes)):
        center = area_center(scene.grid, int(k))
        out[i] = np.hypot(scene.source_point[0] - center.x, scene.source_point[1] - center.y)
    return out


def mae(predictions: Sequence[AreaIndex], scenes: Sequence[Scene]) -> float:
    return float(np.mean(localization_errors(predictions, scenes)))


def acc(predictions: Sequence[AreaIndex], scenes: Sequence[Scene]) -> float:
    _check_pair(predictions, scenes)
    hits = sum(int(k) == int(scene.source_area) for k, scene in zip(predictions, scenes))
    return hits / len(scenes)


def learning_error(mae_value: float, ub_mae: float) -> float:
    """Part of the MAE not explained by quantization; may be negative on small samples."""
    return mae_value - ub_mae


def relative_reduction(baseline: float, value: float) -> float:
    """Percentage reduction of ``value`` against ``baseline``; NaN when the baseline is zero."""
    if baseline == 0:
        return float("nan")
    return 100.0 * (baseline - value) / baseline


def predict_dataset(params: ClassifierParams, dataset: Dataset) -> np.ndarray:
    if params.n != dataset.n or params.feature_dim != dataset.feature_dim:
        raise DimensionMismatchError(
            "model (n, feature_dim) vs dataset", (params.n, params.feature_dim), (dataset.n, dataset.feature_dim)
        )
    chunks = []
    for start in range(0, len(dataset), PREDICT_CHUNK):
        idx = np.arange(start, min(start + PREDICT_CHUNK, len(dataset)))
        chunks.append(predict(params, encode_batch(dataset, idx)))
    return np.concatenate(chunks)


def evaluate_predictions(
    predictions: Sequence[AreaIndex],
    dataset: Dataset,
    strategy: str = "",
    ub_samples: int = 100_000,
    ub_seed: int = 0,
) -> EvalReport:
    """Per-room and aggregate MAE / ACC / UB-MAE for a fixed set of predictions."""
    predictions = np.asarray(predictions, dtype=np.int64)
    errors = localization_errors(predictions, dataset.scenes)
    hits = predictions == dataset.source_areas
    rooms = []
    for room in np.unique(dataset.rooms):
        mask = dataset.rooms == room
        bound = _room_bound(dataset.grids[room], ub_samples, derive_seed(ub_seed, "ub", int(room)))
        rooms.append(RoomMetrics(int(room), int(mask.sum()), float(errors[mask].mean()), float(hits[mask].mean()), bound))

    counts = np.array([r.count for r in rooms], dtype=np.float64)
    ub_total = float(np.dot(counts, [r.ub_mae for r in rooms]) / counts.sum())
    aggregate = RoomMetrics(None, len(dataset), float(errors.mean()), float(hits.mean()), ub_total)
    return EvalReport(strategy=strategy, rooms=rooms, aggregate=aggregate, predictions=predictions)


def evaluate(
    state: Union["TrainState", "Checkpoint", ClassifierParams],
    test: Dataset,
    ub_samples: int = 100_000,
    ub_seed: int = 0,
) -> EvalReport:
    """Predict every test scene with the trained model and report metrics per room."""
    params = state if isinstance(state, ClassifierParams) else state.params
    strategy = "" if isinstance(state, ClassifierParams) else state.strategy.value
    predictions = predict_dataset(params, test)
    report = evaluate_predictions(predictions, test, strategy, ub_samples, ub_seed)
    logger.info(
        "%s: MAE %.4f m, ACC %.1f%%, UB-MAE %.4f m over %d scenes",
        strategy or "model", report.aggregate.mae, 100 * report.aggregate.acc, report.aggregate.ub_mae, len(test),
    )
    return report


def _sweep_config(param: str, value: float, base_cfg: TrainConfig) -> TrainConfig:
    strategy = base_cfg.strategy
    if param == "alpha_s" and not strategy.uses_sslc:
        logger.warning("alpha_s sweep: strategy %s ignores SSLC; using SSLC", strategy.value)
        strategy = Strategy.SSLC
    if param == "alpha_d" and strategy not in (Strategy.DSLC_ONEHOT_CONST, Strategy.DSLC_SSLC_CONST):
        logger.warning("alpha_d sweep: strategy %s has no constant alpha_d; using DSLC_SSLC_CONST", strategy.value)
        strategy = Strategy.DSLC_SSLC_CONST
    try:
        return TrainConfig.model_validate({**base_cfg.model_dump(), param: value, "strategy": strategy})
    except ValueError as exc:
        raise InvalidConfigurationError(f"{param}={value} is not a valid training setting: {exc}") from exc


def sweep(
    param: str,
    values: Sequence[float],
    base_cfg: TrainConfig,
    train: Dataset,
    valid: Dataset,
    test: Dataset,
    ub_samples: int = 100_000,
    ub_seed: int = 0,
) -> List[SweepRow]:
    """Train one model per value (same seed for all) and evaluate each on ``test``."""
    from soft_label_loc.training import fit

    if param not in ("alpha_s", "alpha_d"):
        raise InvalidConfigurationError(f"cannot sweep {param!r}; choose alpha_s or alpha_d")
    if len(values) == 0:
        raise EmptyInputError("sweep needs at least one value")
    rows = []
    for value in values:
        cfg = _sweep_config(param, float(value), base_cfg)
        state = fit(cfg, train, valid)
        rows.append(SweepRow(float(value), cfg.strategy, evaluate(state, test, ub_samples, ub_seed)))
    return rows


def median_report(reports: Sequence[EvalReport]) -> EvalReport:
    """Per-room, per-metric median over runs; learning error stays MAE - UB-MAE."""
    if not reports:
        raise EmptyInputError("median of no reports")
    if len(reports) == 1:
        return reports[0]

    def _median(rows: Sequence[RoomMetrics]) -> RoomMetrics:
        return RoomMetrics(
            rows[0].room,
            rows[0].count,
            float(np.median([r.mae for r in rows])),
            float(np.median([r.acc for r in rows])),
            float(np.median([r.ub_mae for r in rows])),
        )

    rooms = [_median([r.rooms[i] for r in reports]) for i in range(len(reports[0].rooms))]
    return EvalReport(reports[0].strategy, rooms, _median([r.aggregate for r in reports]))


def compare(
    strategies: Sequence[Strategy],
    seeds: int,
    base_cfg: TrainConfig,
    train: Dataset,
    valid: Dataset,
    test: Dataset,
    ub_samples: int = 100_000,
    ub_seed: int = 0,
) -> Dict[Strategy, EvalReport]:
    """Train every strategy on the same seeds; median-aggregate each strategy's reports."""
    from soft_label_loc.training import fit

    if seeds < 1:
        raise EmptyInputError("compare needs at least one seed")
    run_seeds = [base_cfg.seed] if seeds == 1 else [derive_seed(base_cfg.seed or 0, "compare", s) for s in range(seeds)]
    results = {}
    for strategy in strategies:
        reports = []
        for seed in run_seeds:
            cfg = base_cfg.model_copy(update={"strategy": Strategy(strategy), "seed": seed})
            reports.append(evaluate(fit(cfg, train, valid), test, ub_samples, ub_seed))
        results[Strategy(strategy)] = median_report(reports)
    return results
