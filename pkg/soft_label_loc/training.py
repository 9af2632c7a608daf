"""Epoch-driven training with one-hot, SSLC, smoothed and DSLC supervision.

Joint strategies minimise

    alpha_d(t) * CE(DSLC row of epoch t-1) + (1 - alpha_d(t)) * CE(static row)

where the static row comes from the one-hot or SSLC codebook of the scene's
room. Both terms share the same softmax output, so the joint loss is the
cross-entropy against the convex mix of the two rows, which is what the
optimizer differentiates.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from soft_label_loc.codebook import (
    CodeBook,
    EpochStats,
    SslcConfig,
    dslc_from_stats,
    one_hot_codebook,
    smoothed_codebook,
    sslc_codebook,
)
from soft_label_loc.config import Strategy, TrainConfig, derive_seed
from soft_label_loc.errors import DimensionMismatchError, InvalidConfigurationError, NonFiniteError
from soft_label_loc.evaluation import acc, mae, predict_dataset
from soft_label_loc.geometry import average_diagonal
from soft_label_loc.model import AdamOptimizer, ClassifierParams, init_params, loss_and_gradient_batch
from soft_label_loc.simulator import Dataset, encode_batch

logger = logging.getLogger(__name__)


@dataclass
class EpochRecord:
    epoch: int
    strategy: str
    loss: float
    train_acc: float
    alpha_d: float
    valid_mae: Optional[float] = None
    valid_acc: Optional[float] = None


@dataclass
class TrainState:
    """Everything needed to continue training after epoch ``epoch``."""
    strategy: Strategy
    params: ClassifierParams
    optimizer: AdamOptimizer
    static: List[CodeBook]
    dslc: CodeBook
    epoch: int = 0
    last_accuracy: Optional[float] = None
    stats: Optional[EpochStats] = None
    history: List[EpochRecord] = field(default_factory=list)

    def static_targets(self, classes: np.ndarray, rooms: np.ndarray) -> np.ndarray:
        stacked = np.stack([book.matrix for book in self.static])
        return stacked[rooms, classes - 1]


def joint_loss(static_row: Sequence[float], dslc_row: Sequence[float], softmax_out: Sequence[float], alpha_d_t: float) -> float:
    """alpha * CE(dslc_row) + (1 - alpha) * CE(static_row) against one softmax output."""
    static_row = np.asarray(static_row, dtype=np.float64)
    dslc_row = np.asarray(dslc_row, dtype=np.float64)
    log_out = np.log(np.asarray(softmax_out, dtype=np.float64))
    if not (static_row.shape == dslc_row.shape == log_out.shape):
        raise DimensionMismatchError("joint loss row lengths", static_row.shape, (dslc_row.shape, log_out.shape))
    if not 0.0 <= alpha_d_t <= 1.0:
        raise InvalidConfigurationError(f"alpha_d must lie in [0, 1], got {alpha_d_t}")
    dslc_ce = -float(np.dot(dslc_row, log_out))
    static_ce = -float(np.dot(static_row, log_out))
    return alpha_d_t * dslc_ce + (1.0 - alpha_d_t) * static_ce


def alpha_schedule(cfg: TrainConfig, prev_epoch_accuracy: Optional[float]) -> float:
    """Weight of the DSLC term for the coming epoch.

    Constant strategies use ``cfg.alpha_d``; adaptive ones use the previous
    epoch's training accuracy, or 0 before any epoch has run.
    """
    if prev_epoch_accuracy is not None and not 0.0 <= prev_epoch_accuracy <= 1.0:
        raise InvalidConfigurationError(f"accuracy must lie in [0, 1], got {prev_epoch_accuracy}")
    strategy = cfg.strategy
    if not strategy.uses_dslc:
        return 0.0
    if strategy is Strategy.DSLC_ONLY:
        return 1.0
    if strategy.adaptive:
        return 0.0 if prev_epoch_accuracy is None else float(prev_epoch_accuracy)
    return cfg.alpha_d


def static_codebooks(cfg: TrainConfig, train: Dataset) -> List[CodeBook]:
    """One static codebook per training room (SSLC depends on the room's geometry)."""
    if cfg.strategy.uses_sslc:
        sslc = SslcConfig(alpha_s=cfg.alpha_s, l_ave=average_diagonal(train.grids))
        return [sslc_codebook(grid, sslc) for grid in train.grids]
    if cfg.strategy is Strategy.LABEL_SMOOTHING:
        return [smoothed_codebook(train.n, cfg.epsilon_init)] * len(train.grids)
    return [one_hot_codebook(train.n)] * len(train.grids)


def init_state(cfg: TrainConfig, train: Dataset) -> TrainState:
    seed = cfg.seed or 0
    params = init_params(train.n, train.feature_dim, cfg.hidden, derive_seed(seed, "init"))
    optimizer = AdamOptimizer(params.size, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps)
    return TrainState(
        strategy=cfg.strategy,
        params=params,
        optimizer=optimizer,
        static=static_codebooks(cfg, train),
        dslc=smoothed_codebook(train.n, cfg.epsilon_init),
    )


def supervision_targets(state: TrainState, classes: np.ndarray, rooms: np.ndarray, alpha_d_t: float) -> np.ndarray:
    """Rows (1 - alpha) * static + alpha * DSLC for each sample."""
    static = state.static_targets(classes, rooms)
    if alpha_d_t == 0.0:
        return static
    return (1.0 - alpha_d_t) * static + alpha_d_t * state.dslc.rows_for(classes)


def _check_compatible(state: TrainState, data: Dataset) -> None:
    if data.n != state.params.n or data.feature_dim != state.params.feature_dim:
        raise DimensionMismatchError(
            "dataset (n, feature_dim) vs model", (state.params.n, state.params.feature_dim), (data.n, data.feature_dim)
        )
    if len(data.grids) != len(state.static):
        raise DimensionMismatchError("training rooms", len(state.static), len(data.grids))


def train_epoch(state: TrainState, data: Dataset, cfg: TrainConfig) -> TrainState:
    """Run one epoch in place and return ``state``.

    Every training sample's softmax output is fed to the epoch statistics during
    the same pass; at the end ACC(t) = accepted / total and, for DSLC
    strategies, the next DSLC codebook is derived with the current one as the
    fallback for classes that were never predicted correctly.
    """
    _check_compatible(state, data)
    t = state.epoch + 1
    alpha = alpha_schedule(cfg, state.last_accuracy)
    rng = np.random.default_rng(derive_seed(cfg.seed or 0, "shuffle", t))
    order = rng.permutation(len(data))
    stats = EpochStats.empty(data.n)
    total_loss = 0.0

    for start in range(0, len(data), cfg.batch_size):
        idx = order[start:start + cfg.batch_size]
        inputs = encode_batch(data, idx, rng)
        classes = data.source_areas[idx]
        targets = supervision_targets(state, classes, data.rooms[idx], alpha)
        loss, grad, trace = loss_and_gradient_batch(state.params, inputs, targets)
        if not (np.isfinite(loss) and np.all(np.isfinite(grad))):
            raise NonFiniteError(
                f"epoch {t}: non-finite loss ({loss}) at batch starting {start}; "
                f"lower training.learning_rate (currently {cfg.learning_rate:g})"
            )
        stats.record_batch(classes, trace.probs)
        state.optimizer.step(state.params.flat, grad)
        total_loss += loss * len(idx)
        logger.debug("epoch %d batch %d loss %.5f", t, start // cfg.batch_size, loss)

    if state.strategy.uses_dslc:
        state.dslc = dslc_from_stats(stats, fallback=state.dslc)
    state.epoch = t
    state.last_accuracy = stats.accuracy
    state.stats = stats
    state.history.append(EpochRecord(t, state.strategy.value, total_loss / len(data), stats.accuracy, alpha))
    return state


def fit(
    cfg: TrainConfig,
    train: Dataset,
    valid: Dataset,
    state: Optional[TrainState] = None,
    on_epoch: Optional[Callable[[TrainState], None]] = None,
) -> TrainState:
    """Train until ``cfg.epochs`` epochs have run, validating after each one.

    Passing ``state`` resumes from its stored epoch.
    """
    if valid.n != train.n or valid.feature_dim != train.feature_dim:
        raise DimensionMismatchError("valid (n, feature_dim)", (train.n, train.feature_dim), (valid.n, valid.feature_dim))
    if state is None:
        state = init_state(cfg, train)
    elif state.strategy is not cfg.strategy:
        raise InvalidConfigurationError(f"checkpoint strategy {state.strategy.value} differs from config {cfg.strategy.value}")

    while state.epoch < cfg.epochs:
        train_epoch(state, train, cfg)
        predictions = predict_dataset(state.params, valid)
        record = state.history[-1]
        record.valid_mae = mae(predictions, valid.scenes)
        record.valid_acc = acc(predictions, valid.scenes)
        logger.info(
            "%s epoch %d/%d: loss %.4f, train ACC %.1f%%, alpha_d %.3f, valid MAE %.4f m, valid ACC %.1f%%",
            cfg.strategy.value, record.epoch, cfg.epochs, record.loss, 100 * record.train_acc,
            record.alpha_d, record.valid_mae, 100 * record.valid_acc,
        )
        if on_epoch is not None:
            on_epoch(state)
    return state


def resume_state(cfg: TrainConfig, train: Dataset, checkpoint, history: Sequence[EpochRecord] = ()) -> TrainState:
    """Rebuild a TrainState from a stored checkpoint; static codebooks are recomputed from ``train``."""
    params = checkpoint.params
    if params.n != train.n or params.feature_dim != train.feature_dim or params.hidden != cfg.hidden:
        raise DimensionMismatchError(
            "checkpoint (n, feature_dim, hidden)",
            (train.n, train.feature_dim, cfg.hidden),
            (params.n, params.feature_dim, params.hidden),
        )
    if checkpoint.strategy is not cfg.strategy:
        raise InvalidConfigurationError(
            f"checkpoint strategy {checkpoint.strategy.value} differs from config {cfg.strategy.value}"
        )
    optimizer = AdamOptimizer(params.size, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps)
    optimizer.load_state(checkpoint.step, checkpoint.m, checkpoint.v)
    return TrainState(
        strategy=checkpoint.strategy,
        params=params,
        optimizer=optimizer,
        static=static_codebooks(cfg, train),
        dslc=checkpoint.dslc,
        epoch=checkpoint.epoch,
        last_accuracy=checkpoint.last_accuracy,
        history=[r for r in history if r.epoch <= checkpoint.epoch],
    )
