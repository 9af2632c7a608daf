#!/usr/bin/env python3
"""
Soft Label Localization - MCP Server

Exposes codebook inspection, quantization bounds and the experiment commands
(simulate, train, evaluate, sweep, compare) as tools, so an assistant can run
and read localization experiments from the same YAML config the CLI uses.
"""

import logging
import sys

import numpy as np
from mcp.server.fastmcp import FastMCP

from soft_label_loc import cli
from soft_label_loc.codebook import SslcConfig, diagonal_mass, one_hot_codebook, smoothed_codebook, sslc_codebook
from soft_label_loc.config import STANDARD_STRATEGIES, Strategy, load_config, run_directory
from soft_label_loc.exporters import (
    comparison_table,
    history_summary,
    history_table,
    learning_error_table,
    report_table,
    sweep_table,
)
from soft_label_loc.geometry import RoomGrid, analytic_square_bound, average_diagonal, quantization_upper_bound

logger = logging.getLogger(__name__)

# Create the FastMCP server
mcp = FastMCP("soft-label-localization")


def _fail(exc: Exception) -> str:
    logger.debug("tool failed", exc_info=True)
    return f"❌ {type(exc).__name__}: {exc}"


@mcp.tool()
def describe_codebook(
    kind: str = "SSLC",
    length: float = 6.0,
    width: float = 6.0,
    rows: int = 8,
    cols: int = 8,
    alpha_s: float = 2.8,
    epsilon: float = 0.1,
    show_rows: int = 3,
) -> str:
    """
    Build a target codebook for one room and summarise it.

    Args:
        kind: ONE_HOT, SSLC or SMOOTHED
        length: Room length in meters (rows run along it)
        width: Room width in meters (columns run along it)
        rows: Grid rows
        cols: Grid columns
        alpha_s: SSLC sharpness; sigma = cell diagonal / alpha_s
        epsilon: Smoothing mass for SMOOTHED
        show_rows: Number of leading rows to print

    Returns:
        Diagonal mass statistics and the first rows of the matrix
    """
    try:
        grid = RoomGrid(length=length, width=width, rows=rows, cols=cols)
        kind = kind.upper()
        if kind == "SSLC":
            cfg = SslcConfig(alpha_s=alpha_s, l_ave=average_diagonal([grid]))
            book = sslc_codebook(grid, cfg)
            header = f"SSLC codebook, sigma = {cfg.sigma:.4f} m"
        elif kind == "SMOOTHED":
            book = smoothed_codebook(grid.n, epsilon)
            header = f"Smoothed codebook, epsilon = {epsilon}"
        elif kind == "ONE_HOT":
            book = one_hot_codebook(grid.n)
            header = "One-hot codebook"
        else:
            return f"❌ Unknown codebook kind '{kind}'. Use ONE_HOT, SSLC or SMOOTHED."

        mass = diagonal_mass(book)
        report = f"""
📐 {header}
Room {length:g} x {width:g} m, grid {rows} x {cols} ({grid.n} areas)

🎯 Mass kept on the true area: min {mass.min():.4f}, mean {mass.mean():.4f}
"""
        if kind == "SSLC" and mass.min() < 0.8:
            report += "⚠️ Less than 80% of the mass stays on the true area; consider a larger alpha_s.\n"
        report += "\nFirst rows:\n"
        with np.printoptions(precision=4, suppress=True, linewidth=120):
            for k in range(1, min(show_rows, grid.n) + 1):
                report += f"  area {k}: {book.row(k)}\n"
        return report
    except Exception as exc:
        return _fail(exc)


@mcp.tool()
def quantization_bound(
    length: float,
    width: float,
    rows: int = 8,
    cols: int = 8,
    samples: int = 100_000,
    seed: int = 0,
) -> str:
    """
    Estimate the MAE floor a perfect area classifier still incurs.

    Args:
        length: Room length in meters
        width: Room width in meters
        rows: Grid rows
        cols: Grid columns
        samples: Monte-Carlo sample count
        seed: Sampling seed

    Returns:
        Monte-Carlo UB-MAE, plus the closed form when cells are square
    """
    try:
        grid = RoomGrid(length=length, width=width, rows=rows, cols=cols)
        bound = quantization_upper_bound(grid, samples, seed)
        report = f"📏 UB-MAE for {length:g} x {width:g} m on {rows} x {cols}: {bound:.4f} m ({samples} samples)\n"
        if np.isclose(grid.cell_width, grid.cell_height):
            report += f"   Closed form for square cells: {analytic_square_bound(grid.cell_width):.4f} m\n"
        return report
    except Exception as exc:
        return _fail(exc)


@mcp.tool()
def simulate_datasets(config_path: str) -> str:
    """
    Generate the train/valid/test datasets described by a config file.

    Args:
        config_path: Path to the experiment YAML

    Returns:
        Location of the run directory
    """
    try:
        cfg = load_config(config_path)
        run = cli.cmd_simulate(cfg)
        splits = cfg.simulation.splits
        return (
            f"✅ Datasets written to {run}/data\n"
            f"   train {splits.train}, valid {splits.valid}, test {splits.test} scenes\n"
        )
    except Exception as exc:
        return _fail(exc)


@mcp.tool()
def train_model(config_path: str, resume: bool = False) -> str:
    """
    Train the configured strategy on the run's datasets.

    Args:
        config_path: Path to the experiment YAML
        resume: Continue from the stored checkpoint if there is one

    Returns:
        Per-epoch history and trend lines
    """
    try:
        state = cli.cmd_train(load_config(config_path), resume=resume)
        return f"✅ Trained {state.strategy.value} for {state.epoch} epochs\n\n" + history_summary(state.history) + "\n" + history_table(state.history)
    except Exception as exc:
        return _fail(exc)


@mcp.tool()
def evaluate_model(config_path: str, checkpoint: str = "", dataset: str = "") -> str:
    """
    Evaluate a checkpoint and report MAE, ACC and UB-MAE per room.

    Args:
        config_path: Path to the experiment YAML
        checkpoint: Checkpoint file (default: the configured strategy's checkpoint)
        dataset: Dataset file (default: the run's test split)

    Returns:
        Tab-separated report table
    """
    try:
        report = cli.cmd_eval(load_config(config_path), checkpoint or None, dataset or None)
        return f"📊 {report.strategy}\n\n" + report_table(report)
    except Exception as exc:
        return _fail(exc)


@mcp.tool()
def sweep_hyperparameter(config_path: str, param: str = "", values: str = "") -> str:
    """
    Train one model per value of alpha_s or alpha_d and evaluate each.

    Args:
        config_path: Path to the experiment YAML
        param: alpha_s or alpha_d (default: the config's sweep.param)
        values: Comma-separated values (default: the config's sweep.values)

    Returns:
        Sweep table
    """
    try:
        parsed = [float(v) for v in values.split(",") if v.strip()] if values else None
        param, rows = cli.cmd_sweep(load_config(config_path), param or None, parsed)
        best = min(rows, key=lambda r: r.mae)
        return sweep_table(param, rows) + f"\n🏆 Lowest MAE at {param} = {best.value:g} ({best.mae:.4f} m)\n"
    except Exception as exc:
        return _fail(exc)


@mcp.tool()
def compare_strategies(config_path: str, seeds: int = 0) -> str:
    """
    Train and evaluate every configured strategy with shared seeds.

    Args:
        config_path: Path to the experiment YAML
        seeds: Number of seeds (default: the config's compare.seeds)

    Returns:
        MAE/ACC comparison and the learning-error decomposition
    """
    try:
        cfg = load_config(config_path)
        reports = cli.cmd_compare(cfg, seeds or None)
        return (
            f"📊 Strategy comparison ({run_directory(cfg)})\n\n"
            + comparison_table(reports) + "\n" + learning_error_table(reports)
        )
    except Exception as exc:
        return _fail(exc)


@mcp.prompt()
def label_coding_guide() -> str:
    """
    Guide for choosing a label coding strategy.

    Returns the strategies, their knobs and a suggested workflow.
    """
    standard = ", ".join(s.value for s in STANDARD_STRATEGIES)
    return f"""
# Choosing a Label Coding Strategy

Localization here is classification over the local areas of a room grid.
The target for each training scene is a row of a codebook.

## Strategies

Standard comparison set: {standard}

- {Strategy.ONE_HOT.value}: all mass on the true area.
- {Strategy.SSLC.value}: Gaussian-CDF soft codes; nearby areas get more mass.
  alpha_s controls the spread (sigma = mean cell diagonal / alpha_s).
  Below about 2.6 the true area keeps less than 80% of the mass; above 3 the
  codes are almost one-hot.
- DSLC_*: each epoch, the targets become the average softmax output of the
  correctly classified training scenes of that area.
  _CONST mixes with weight alpha_d; _ADAPTIVE uses the previous epoch's
  training accuracy as the weight.
- {Strategy.LABEL_SMOOTHING.value} and {Strategy.DSLC_ONLY.value}: extra
  baselines (uniform smoothing; online smoothing alone).

## Workflow

1. simulate_datasets(config_path)
2. train_model(config_path) or compare_strategies(config_path)
3. evaluate_model(config_path)
4. sweep_hyperparameter(config_path, "alpha_s", "2.6,2.7,2.8,2.9,3.0")

Read MAE against UB-MAE: the difference is the learning error, the part a
better model or better targets can still remove.
"""


def main():
    """
    Main entry point for the Soft Label Localization server.
    Starts the server with STDIO transport.
    """
    try:
        print("Starting Soft Label Localization server...", file=sys.stderr)
        mcp.run()
    except Exception as e:
        print(f"Failed to start Soft Label Localization server: {e}", file=sys.stderr)
        import traceback
        traceback.print_exc(file=sys.stderr)
        sys.exit(1)


if __name__ == "__main__":
    main()
