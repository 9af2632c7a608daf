"""Tests for one-hot, SSLC, smoothed and DSLC codebooks."""
import numpy as np
import pytest
from scipy.integrate import cumulative_trapezoid

from soft_label_loc.codebook import (
    ROW_SUM_TOL,
    CodeBook,
    CodeKind,
    EpochStats,
    SslcConfig,
    argmax_class,
    diagonal_mass,
    dslc_from_stats,
    normal_cdf,
    one_hot_codebook,
    record_prediction,
    smoothed_codebook,
    sslc_codebook,
)
from soft_label_loc.errors import (
    DimensionMismatchError,
    EmptyInputError,
    InvalidConfigurationError,
    InvalidIndexError,
)
from soft_label_loc.geometry import RoomGrid, average_diagonal, distance_matrix


def _sslc(grid, alpha_s):
    return sslc_codebook(grid, SslcConfig(alpha_s=alpha_s, l_ave=average_diagonal([grid])))


def _random_grids(count, seed):
    """Rooms 4-10 m with shapes up to 15 x 15 and roughly square cells."""
    rng = np.random.default_rng(seed)
    grids = []
    for _ in range(count):
        length, width = rng.uniform(4.0, 10.0, size=2)
        rows = int(rng.integers(2, 16))
        cols = int(np.clip(round(rows * width / length), 1, 15))
        grids.append(RoomGrid(length=float(length), width=float(width), rows=rows, cols=cols))
    return grids


class TestNormalCdf:
    """Test the Gaussian CDF against numerical integration."""

    def test_trapezoid_oracle(self):
        """Test agreement with trapezoid integration of the density on 1000 points in [-8, 8]."""
        x = np.linspace(-12.0, 8.0, 200_001)
        density = np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)
        integral = cumulative_trapezoid(density, x, initial=0.0)
        rng = np.random.default_rng(0)
        in_range = np.flatnonzero(x >= -8.0)
        picks = rng.choice(in_range, size=1000, replace=False)
        assert np.max(np.abs(normal_cdf(x[picks]) - integral[picks])) < 1e-7

    def test_symmetry(self):
        """Test Phi(z) + Phi(-z) = 1 and Phi(0) = 0.5."""
        z = np.linspace(-6, 6, 101)
        assert np.allclose(normal_cdf(z) + normal_cdf(-z), 1.0, atol=1e-15)
        assert normal_cdf(0.0) == 0.5

    def test_lower_tail_relative_accuracy(self):
        """Test the far tail stays positive and relatively accurate."""
        assert normal_cdf(-30.0) > 0.0
        assert normal_cdf(-30.0) == pytest.approx(4.906713927148187e-198, rel=1e-6)


class TestSslc:
    """Test static soft label coding."""

    def test_rows_sum_to_one_on_random_grids(self):
        """Test row sums and distance monotonicity for 100 random grids."""
        rng = np.random.default_rng(42)
        for grid in _random_grids(100, seed=7):
            book = _sslc(grid, float(rng.uniform(2.6, 3.0)))
            assert book.max_row_error() <= ROW_SUM_TOL
            distances = distance_matrix(grid)
            for i in range(grid.n):
                order = np.argsort(distances[i], kind="stable")
                assert np.all(np.diff(book.matrix[i, order]) <= 1e-12)

    def test_off_diagonal_symmetry(self):
        """Test S[i,k] = S[k,i] off the diagonal on a non-square grid."""
        grid = RoomGrid(length=5.0, width=7.0, rows=5, cols=6)
        off = _sslc(grid, 2.8).matrix.copy()
        np.fill_diagonal(off, 0.0)
        assert np.array_equal(off, off.T)

    def test_distance_equal_to_sigma(self):
        """Test a neighbour at distance sigma gets Phi(-1) and the true area keeps the rest."""
        grid = RoomGrid(length=1.0, width=2.0, rows=1, cols=2)
        book = sslc_codebook(grid, SslcConfig(alpha_s=np.sqrt(2.0), l_ave=np.sqrt(2.0)))
        assert book.matrix[0, 1] == pytest.approx(0.158655, abs=1e-6)
        assert book.matrix[0, 0] == pytest.approx(1.0 - 0.158655, abs=1e-6)

    def test_large_alpha_is_one_hot(self, desk_grid):
        """Test a very sharp SSLC collapses to one-hot."""
        book = _sslc(desk_grid, 100.0)
        assert np.max(np.abs(book.matrix - np.eye(desk_grid.n))) < 1e-10

    def test_diagonal_mass_grows_with_alpha(self, desk_grid):
        """Test sharper codes keep more mass on the true area."""
        soft = diagonal_mass(_sslc(desk_grid, 2.6)).min()
        sharp = diagonal_mass(_sslc(desk_grid, 3.0)).min()
        assert 0.0 < soft < sharp < 1.0

    def test_kind_and_rows(self, small_grid):
        """Test the codebook is tagged SSLC and row access is 1-based."""
        book = _sslc(small_grid, 2.8)
        assert book.kind is CodeKind.SSLC
        assert book.row(1)[0] == book.matrix[0, 0]
        assert np.argmax(book.row(6)) == 5

    def test_too_flat_reports_row(self, small_grid):
        """Test a sigma too wide for the grid names the offending row."""
        with pytest.raises(InvalidConfigurationError) as excinfo:
            _sslc(small_grid, 0.05)
        assert excinfo.value.row == 1

    def test_invalid_sslc_config(self):
        """Test non-positive alpha_s or l_ave is rejected."""
        with pytest.raises(InvalidConfigurationError):
            SslcConfig(alpha_s=0.0, l_ave=1.0)
        with pytest.raises(InvalidConfigurationError):
            SslcConfig(alpha_s=2.8, l_ave=0.0)


class TestStaticCodebooks:
    """Test one-hot and uniform smoothing."""

    def test_one_hot(self):
        """Test one-hot is the identity."""
        assert np.array_equal(one_hot_codebook(5).matrix, np.eye(5))

    def test_one_hot_empty(self):
        """Test zero classes is an error."""
        with pytest.raises(EmptyInputError):
            one_hot_codebook(0)

    def test_smoothed(self):
        """Test smoothing keeps 1 - epsilon on the diagonal and spreads the rest."""
        book = smoothed_codebook(5, 0.2)
        assert np.allclose(np.diag(book.matrix), 0.8)
        assert book.matrix[0, 1] == pytest.approx(0.05)
        assert book.max_row_error() < 1e-12

    @pytest.mark.parametrize("n,epsilon", [(1, 0.1), (5, 0.0), (5, 1.0)])
    def test_smoothed_invalid(self, n, epsilon):
        """Test invalid smoothing parameters."""
        with pytest.raises(InvalidConfigurationError):
            smoothed_codebook(n, epsilon)

    def test_row_out_of_range(self):
        """Test row access outside 1..n."""
        with pytest.raises(InvalidIndexError):
            one_hot_codebook(3).row(4)

    def test_non_square(self):
        """Test a non-square matrix is not a codebook."""
        with pytest.raises(DimensionMismatchError):
            CodeBook(np.ones((2, 3)) / 3, CodeKind.DSLC)


class TestArgmax:
    """Test 1-based argmax."""

    def test_ties_go_low(self):
        """Test ties resolve to the lowest index."""
        assert argmax_class([0.2, 0.4, 0.4]) == 2

    def test_empty(self):
        """Test an empty vector is an error."""
        with pytest.raises(EmptyInputError):
            argmax_class([])


class TestEpochStats:
    """Test accumulation of correctly classified outputs."""

    def test_perfect_model_gives_one_hot(self):
        """Test a perfect model yields ACC = 1 and a one-hot DSLC codebook."""
        n = 6
        classes = np.tile(np.arange(1, n + 1), 3)
        outputs = np.eye(n)[classes - 1]
        stats = EpochStats.empty(n).record_batch(classes, outputs)
        assert stats.accuracy == 1.0
        book = dslc_from_stats(stats, fallback=smoothed_codebook(n, 0.1))
        assert np.max(np.abs(book.matrix - np.eye(n))) < 1e-9
        assert book.kind is CodeKind.DSLC

    def test_always_wrong_keeps_fallback(self):
        """Test a model that is never right leaves every row at its fallback."""
        n = 5
        classes = np.arange(1, n + 1)
        outputs = np.eye(n)[classes % n]
        stats = EpochStats.empty(n).record_batch(classes, outputs)
        assert stats.accuracy == 0.0
        fallback = smoothed_codebook(n, 0.3)
        assert np.array_equal(dslc_from_stats(stats, fallback).matrix, fallback.matrix)

    def test_rows_are_means_of_accepted_outputs(self):
        """Test a filled row is the mean of its correct outputs and wrong ones are discarded."""
        stats = EpochStats.empty(3)
        record_prediction(stats, 1, [0.6, 0.3, 0.1])
        record_prediction(stats, 1, [0.8, 0.1, 0.1])
        record_prediction(stats, 1, [0.2, 0.7, 0.1])
        book = dslc_from_stats(stats, fallback=one_hot_codebook(3))
        assert book.row(1) == pytest.approx([0.7, 0.2, 0.1])
        assert np.array_equal(book.row(2), [0.0, 1.0, 0.0])
        assert stats.seen == 3 and stats.accepted == 2

    def test_merge_matches_single_pass(self):
        """Test merging two shards equals recording everything at once."""
        rng = np.random.default_rng(3)
        logits = rng.normal(size=(40, 4))
        outputs = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)
        classes = rng.integers(1, 5, size=40)
        whole = EpochStats.empty(4).record_batch(classes, outputs)
        left = EpochStats.empty(4).record_batch(classes[:15], outputs[:15])
        right = EpochStats.empty(4).record_batch(classes[15:], outputs[15:])
        merged = left.merge(right)
        assert np.allclose(merged.sums, whole.sums)
        assert np.array_equal(merged.counts, whole.counts)
        assert (merged.seen, merged.accepted) == (whole.seen, whole.accepted)

    def test_rejects_unnormalised_output(self):
        """Test outputs must be probability vectors."""
        with pytest.raises(InvalidConfigurationError):
            record_prediction(EpochStats.empty(3), 1, [0.5, 0.5, 0.5])

    def test_rejects_wrong_width(self):
        """Test output length must match the class count."""
        with pytest.raises(DimensionMismatchError):
            record_prediction(EpochStats.empty(3), 1, [0.5, 0.5])

    def test_rejects_bad_class(self):
        """Test the true class must lie in 1..n."""
        with pytest.raises(InvalidIndexError):
            record_prediction(EpochStats.empty(3), 0, [1.0, 0.0, 0.0])

    def test_fallback_size_mismatch(self):
        """Test the fallback must have the same class count."""
        with pytest.raises(DimensionMismatchError):
            dslc_from_stats(EpochStats.empty(3), one_hot_codebook(4))
