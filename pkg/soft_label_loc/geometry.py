"""Room and grid arithmetic: local areas, centers, distances, quantization bounds.

Area indices are 1-based and row-major from the room's origin corner: area 1 is
(row 0, col 0), area ``cols`` is (row 0, col cols-1). Columns run along the
room width (x), rows along the room length (y).
"""
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence, Tuple

import numpy as np

from soft_label_loc.errors import EmptyInputError, InvalidConfigurationError, InvalidIndexError

AreaIndex = int


class Point2D(NamedTuple):
    """In-room coordinate in meters."""
    x: float
    y: float


@dataclass(frozen=True)
class RoomGrid:
    """A rectangular room partitioned into ``rows`` x ``cols`` local areas."""
    length: float
    width: float
    rows: int
    cols: int

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise InvalidConfigurationError(f"grid shape must be at least 1x1, got {self.rows}x{self.cols}")
        if not (math.isfinite(self.length) and math.isfinite(self.width)):
            raise InvalidConfigurationError("room dimensions must be finite")
        # Zero-size rooms are allowed; they only make sense for the degenerate bound.
        if self.length < 0 or self.width < 0:
            raise InvalidConfigurationError(
                f"room dimensions must be non-negative, got {self.length}x{self.width}"
            )

    @property
    def n(self) -> int:
        return self.rows * self.cols

    @property
    def cell_width(self) -> float:
        return self.width / self.cols

    @property
    def cell_height(self) -> float:
        return self.length / self.rows

    @property
    def cell_diagonal(self) -> float:
        return math.hypot(self.cell_width, self.cell_height)

    def transposed(self) -> "RoomGrid":
        return RoomGrid(length=self.width, width=self.length, rows=self.cols, cols=self.rows)


def _check_index(grid: RoomGrid, k: AreaIndex) -> None:
    if not isinstance(k, (int, np.integer)) or isinstance(k, bool) or not 1 <= k <= grid.n:
        raise InvalidIndexError(f"area index {k!r} outside 1..{grid.n}")


def row_col(grid: RoomGrid, k: AreaIndex) -> Tuple[int, int]:
    """Zero-based (row, col) of area ``k``."""
    _check_index(grid, k)
    return divmod(int(k) - 1, grid.cols)


def index_of(grid: RoomGrid, row: int, col: int) -> AreaIndex:
    if not (0 <= row < grid.rows and 0 <= col < grid.cols):
        raise InvalidIndexError(f"cell ({row}, {col}) outside {grid.rows}x{grid.cols} grid")
    return row * grid.cols + col + 1


def area_center(grid: RoomGrid, k: AreaIndex) -> Point2D:
    """Geometric center of local area ``k``."""
    row, col = row_col(grid, k)
    return Point2D((col + 0.5) * grid.cell_width, (row + 0.5) * grid.cell_height)


def area_centers(grid: RoomGrid) -> np.ndarray:
    """(n, 2) array of all centers; row ``k-1`` holds the center of area ``k``."""
    rows, cols = np.divmod(np.arange(grid.n), grid.cols)
    return np.column_stack([(cols + 0.5) * grid.cell_width, (rows + 0.5) * grid.cell_height])


def area_of_point(grid: RoomGrid, point: Sequence[float]) -> AreaIndex:
    """Area containing ``point``; points on the far walls belong to the last row/col."""
    x, y = float(point[0]), float(point[1])
    if not (0.0 <= x <= grid.width and 0.0 <= y <= grid.length):
        raise InvalidIndexError(f"point ({x}, {y}) outside {grid.width}x{grid.length} room")
    col = min(int(x / grid.cell_width), grid.cols - 1) if grid.cell_width > 0 else 0
    row = min(int(y / grid.cell_height), grid.rows - 1) if grid.cell_height > 0 else 0
    return index_of(grid, row, col)


def area_distance(grid: RoomGrid, i: AreaIndex, k: AreaIndex) -> float:
    """Euclidean distance in meters between the centers of areas ``i`` and ``k``."""
    ci = area_center(grid, i)
    ck = area_center(grid, k)
    return math.hypot(ci.x - ck.x, ci.y - ck.y)


def distance_matrix(grid: RoomGrid) -> np.ndarray:
    """(n, n) center-to-center distances; entry [i-1, k-1] is d_{i,k}."""
    centers = area_centers(grid)
    diff = centers[:, None, :] - centers[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def average_diagonal(grids: Sequence[RoomGrid]) -> float:
    """Mean local-area diagonal over rooms (l_ave)."""
    if len(grids) == 0:
        raise EmptyInputError("average_diagonal needs at least one room")
    return float(np.mean([g.cell_diagonal for g in grids]))


def quantization_upper_bound(grid: RoomGrid, samples: int, seed: int) -> float:
    """Monte-Carlo UB-MAE: expected distance from a uniform in-room point to its area center.

    Points are drawn uniformly over the whole room, so every cell is covered
    in proportion to its area.
    """
    if samples < 1:
        raise EmptyInputError("quantization_upper_bound needs at least one sample")
    rng = np.random.default_rng(seed)
    u = rng.random((samples, 2))
    # Work in unit coordinates so zero-size rooms need no division.
    cols = np.minimum(np.floor(u[:, 0] * grid.cols), grid.cols - 1)
    rows = np.minimum(np.floor(u[:, 1] * grid.rows), grid.rows - 1)
    dx = (u[:, 0] * grid.cols - (cols + 0.5)) * grid.cell_width
    dy = (u[:, 1] * grid.rows - (rows + 0.5)) * grid.cell_height
    return float(np.mean(np.hypot(dx, dy)))


def analytic_square_bound(side: float) -> float:
    """Closed-form mean distance to the center of a square cell of the given side."""
    return side / 6.0 * (math.sqrt(2.0) + math.log(1.0 + math.sqrt(2.0)))
