"""Target code families: one-hot, static soft label coding (SSLC), vanilla
label smoothing, and dynamic soft label coding (DSLC) built from the
correctly-classified softmax outputs of one training epoch.

Row ``k`` of a codebook (1-based, like area indices) is the target
distribution used when the true source sits in local area ``k``.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Union

import numpy as np
from scipy.special import ndtr

from soft_label_loc.errors import (
    DimensionMismatchError,
    EmptyInputError,
    InvalidConfigurationError,
    InvalidIndexError,
)
from soft_label_loc.geometry import AreaIndex, RoomGrid, distance_matrix

logger = logging.getLogger(__name__)

ROW_SUM_TOL = 1e-9
SOFTMAX_SUM_TOL = 1e-6


class CodeKind(str, Enum):
    ONE_HOT = "ONE_HOT"
    SSLC = "SSLC"
    SMOOTHED = "SMOOTHED"
    DSLC = "DSLC"


@dataclass
class CodeBook:
    """An n x n row-stochastic matrix of class targets."""
    matrix: np.ndarray
    kind: CodeKind

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise DimensionMismatchError("codebook shape", "square matrix", self.matrix.shape)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def row(self, k: AreaIndex) -> np.ndarray:
        if not 1 <= int(k) <= self.n:
            raise InvalidIndexError(f"class {k} outside 1..{self.n}")
        return self.matrix[int(k) - 1]

    def rows_for(self, classes: np.ndarray) -> np.ndarray:
        """Target rows for an array of 1-based classes."""
        return self.matrix[np.asarray(classes, dtype=np.int64) - 1]

    def max_row_error(self) -> float:
        return float(np.max(np.abs(self.matrix.sum(axis=1) - 1.0)))


@dataclass(frozen=True)
class SslcConfig:
    """SSLC spread: sigma = l_ave / alpha_s."""
    alpha_s: float
    l_ave: float

    def __post_init__(self):
        if not self.alpha_s > 0:
            raise InvalidConfigurationError(f"alpha_s must be positive, got {self.alpha_s}")
        if not self.l_ave > 0:
            raise InvalidConfigurationError(f"l_ave must be positive, got {self.l_ave}")

    @property
    def sigma(self) -> float:
        return self.l_ave / self.alpha_s


def normal_cdf(z: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Standard normal CDF.

    Uses ``scipy.special.ndtr`` (Cephes ``ndtr``: erf/erfc rational
    approximations switched at |z|/sqrt(2) = 1, accurate to double precision),
    which keeps the lower tail relative-accurate down to z = -37.
    """
    result = ndtr(z)
    return float(result) if np.ndim(result) == 0 else result


def one_hot_codebook(n: int) -> CodeBook:
    if n < 1:
        raise EmptyInputError("one-hot codebook needs at least one class")
    return CodeBook(np.eye(n), CodeKind.ONE_HOT)


def sslc_codebook(grid: RoomGrid, cfg: SslcConfig) -> CodeBook:
    """Gaussian-CDF soft codes: S[i,k] = Phi(-d_ik / sigma) off the diagonal,
    with the diagonal absorbing the remaining mass of each row."""
    distances = distance_matrix(grid)
    matrix = normal_cdf(-distances / cfg.sigma)
    np.fill_diagonal(matrix, 0.0)
    diagonal = 1.0 - matrix.sum(axis=1)
    bad = np.flatnonzero(diagonal <= 0.0)
    if bad.size:
        row = int(bad[0]) + 1
        raise InvalidConfigurationError(
            f"SSLC row {row} has no mass left for the true class "
            f"(sigma={cfg.sigma:.4f} m too large for cells of {grid.cell_diagonal:.4f} m; raise alpha_s)",
            row=row,
        )
    matrix[np.diag_indices_from(matrix)] = diagonal
    logger.debug("SSLC sigma=%.4f min diagonal mass=%.4f", cfg.sigma, float(diagonal.min()))
    return CodeBook(matrix, CodeKind.SSLC)


def smoothed_codebook(n: int, epsilon: float) -> CodeBook:
    """Uniform label smoothing: 1 - epsilon on the diagonal, epsilon/(n-1) elsewhere."""
    if n < 2:
        raise InvalidConfigurationError(f"label smoothing needs at least 2 classes, got {n}")
    if not 0.0 < epsilon < 1.0:
        raise InvalidConfigurationError(f"epsilon must lie in (0, 1), got {epsilon}")
    matrix = np.full((n, n), epsilon / (n - 1))
    np.fill_diagonal(matrix, 1.0 - epsilon)
    return CodeBook(matrix, CodeKind.SMOOTHED)


def diagonal_mass(codebook: CodeBook) -> np.ndarray:
    """Probability each row keeps on its own class."""
    return np.diag(codebook.matrix).copy()


def argmax_class(vector: Sequence[float]) -> AreaIndex:
    """1-based index of the maximum; ties go to the lowest index."""
    values = np.asarray(vector, dtype=np.float64)
    if values.size == 0:
        raise EmptyInputError("argmax of an empty vector")
    return int(np.argmax(values)) + 1


@dataclass
class EpochStats:
    """Per-class running sums of correctly-predicted softmax outputs.

    ``sums[i-1]`` and ``counts[i-1]`` belong to ground-truth class ``i``;
    ``seen``/``accepted`` give the epoch's training accuracy. Stats form a
    commutative monoid under :meth:`merge`, so shards can be combined.
    """
    sums: np.ndarray
    counts: np.ndarray
    seen: int = 0
    accepted: int = 0

    @classmethod
    def empty(cls, n: int) -> "EpochStats":
        return cls(np.zeros((n, n)), np.zeros(n, dtype=np.int64))

    @property
    def n(self) -> int:
        return self.sums.shape[0]

    @property
    def accuracy(self) -> float:
        return self.accepted / self.seen if self.seen else 0.0

    def record(self, true_class: AreaIndex, softmax_out: Sequence[float]) -> "EpochStats":
        out = np.asarray(softmax_out, dtype=np.float64)
        if out.shape != (self.n,):
            raise DimensionMismatchError("softmax output length", self.n, out.shape)
        return self.record_batch(np.array([true_class]), out[None, :])

    def record_batch(self, true_classes: np.ndarray, outputs: np.ndarray) -> "EpochStats":
        """Accumulate a batch in place; only rows whose argmax equals the true class count."""
        classes = np.asarray(true_classes, dtype=np.int64)
        outputs = np.asarray(outputs, dtype=np.float64)
        if outputs.ndim != 2 or outputs.shape[1] != self.n:
            raise DimensionMismatchError("softmax output width", self.n, outputs.shape)
        if outputs.shape[0] != classes.shape[0]:
            raise DimensionMismatchError("batch size", classes.shape[0], outputs.shape[0])
        if np.any((classes < 1) | (classes > self.n)):
            raise InvalidIndexError(f"true class outside 1..{self.n}")
        if np.any(np.abs(outputs.sum(axis=1) - 1.0) > SOFTMAX_SUM_TOL):
            raise InvalidConfigurationError("softmax outputs must sum to 1")

        predicted = np.argmax(outputs, axis=1) + 1
        hit = predicted == classes
        np.add.at(self.sums, classes[hit] - 1, outputs[hit])
        self.counts += np.bincount(classes[hit] - 1, minlength=self.n)
        self.seen += int(classes.shape[0])
        self.accepted += int(hit.sum())
        return self

    def merge(self, other: "EpochStats") -> "EpochStats":
        if other.n != self.n:
            raise DimensionMismatchError("epoch stats classes", self.n, other.n)
        return EpochStats(
            self.sums + other.sums,
            self.counts + other.counts,
            self.seen + other.seen,
            self.accepted + other.accepted,
        )


def record_prediction(stats: EpochStats, true_class: AreaIndex, softmax_out: Sequence[float]) -> EpochStats:
    """Add ``softmax_out`` to its class's set when it predicts ``true_class``; discard it otherwise."""
    return stats.record(true_class, softmax_out)


def dslc_from_stats(stats: EpochStats, fallback: CodeBook) -> CodeBook:
    """Average the accepted outputs per class; classes with none keep the fallback row."""
    if fallback.n != stats.n:
        raise DimensionMismatchError("fallback codebook classes", stats.n, fallback.n)
    matrix = fallback.matrix.copy()
    filled = stats.counts > 0
    matrix[filled] = stats.sums[filled] / stats.counts[filled, None]
    empty = int((~filled).sum())
    if empty:
        logger.debug("DSLC: %d of %d classes had no correct prediction; kept previous rows", empty, stats.n)
    return CodeBook(matrix, CodeKind.DSLC)
