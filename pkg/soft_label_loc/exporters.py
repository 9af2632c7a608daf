"""Text renderers for codebooks, training histories and evaluation reports.

Every renderer uses fixed float formatting so identical results give identical
bytes.
"""
import json
import math
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from soft_label_loc.codebook import CodeBook, CodeKind
from soft_label_loc.config import Strategy
from soft_label_loc.errors import FormatError
from soft_label_loc.evaluation import EvalReport, RoomMetrics, SweepRow, relative_reduction
from soft_label_loc.training import EpochRecord

HISTORY_COLUMNS = ("epoch", "strategy", "loss", "train_acc", "alpha_d", "valid_mae", "valid_acc")
REPORT_COLUMNS = ("room", "count", "mae_m", "acc", "ub_mae_m", "learning_error_m")
MISSING = "-"


def _fmt(value: Optional[float], digits: int = 6) -> str:
    if value is None:
        return MISSING
    if math.isnan(value):
        return "nan"
    return f"{value:.{digits}f}"


def codebook_to_text(codebook: CodeBook) -> str:
    """
    Render a codebook as text.

    Args:
        codebook: The codebook to render

    Returns:
        A ``# kind=<KIND> n=<n>`` header followed by one space-separated row per line
    """
    lines = [f"# kind={codebook.kind.value} n={codebook.n}"]
    for row in codebook.matrix:
        lines.append(" ".join(f"{x:.12f}" for x in row))
    return "\n".join(lines) + "\n"


def codebook_from_text(text: str) -> CodeBook:
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines or not lines[0].startswith("#"):
        raise FormatError("codebook text must start with a '# kind=... n=...' header")
    fields = dict(part.split("=", 1) for part in lines[0][1:].split() if "=" in part)
    try:
        kind = CodeKind(fields["kind"])
        n = int(fields["n"])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"bad codebook header {lines[0]!r}") from exc
    try:
        matrix = np.array([[float(x) for x in line.split()] for line in lines[1:]])
    except ValueError as exc:
        raise FormatError(f"non-numeric codebook entry: {exc}") from exc
    if matrix.shape != (n, n):
        raise FormatError(f"codebook header says n={n} but body is {matrix.shape}")
    return CodeBook(matrix, kind)


def history_table(history: Sequence[EpochRecord]) -> str:
    """Tab-delimited per-epoch history."""
    lines = ["\t".join(HISTORY_COLUMNS)]
    for r in history:
        lines.append("\t".join([
            str(r.epoch), r.strategy, _fmt(r.loss), _fmt(r.train_acc), _fmt(r.alpha_d),
            _fmt(r.valid_mae), _fmt(r.valid_acc),
        ]))
    return "\n".join(lines) + "\n"


def read_history_table(text: str) -> List[EpochRecord]:
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines or tuple(lines[0].split("\t")) != HISTORY_COLUMNS:
        raise FormatError("history table has an unexpected header")

    def _value(cell: str) -> Optional[float]:
        return None if cell == MISSING else float(cell)

    records = []
    for number, line in enumerate(lines[1:], start=2):
        cells = line.split("\t")
        if len(cells) != len(HISTORY_COLUMNS):
            raise FormatError(f"history line {number}: expected {len(HISTORY_COLUMNS)} columns, got {len(cells)}")
        try:
            records.append(EpochRecord(
                epoch=int(cells[0]),
                strategy=cells[1],
                loss=float(cells[2]),
                train_acc=float(cells[3]),
                alpha_d=float(cells[4]),
                valid_mae=_value(cells[5]),
                valid_acc=_value(cells[6]),
            ))
        except ValueError as exc:
            raise FormatError(f"history line {number}: {exc}") from exc
    return records


def _report_row(metrics: RoomMetrics) -> str:
    room = "average" if metrics.room is None else str(metrics.room)
    return "\t".join([
        room, str(metrics.count), _fmt(metrics.mae), _fmt(metrics.acc), _fmt(metrics.ub_mae),
        _fmt(metrics.learning_error),
    ])


def report_table(report: EvalReport) -> str:
    """Per-room rows followed by the ``average`` row."""
    lines = ["\t".join(REPORT_COLUMNS)]
    lines.extend(_report_row(m) for m in report.rooms)
    lines.append(_report_row(report.aggregate))
    return "\n".join(lines) + "\n"


def _metrics_dict(metrics: RoomMetrics) -> Dict:
    return {
        "count": metrics.count,
        "mae_m": round(metrics.mae, 6),
        "acc": round(metrics.acc, 6),
        "ub_mae_m": round(metrics.ub_mae, 6),
        "learning_error_m": round(metrics.learning_error, 6),
    }


def report_json(report: EvalReport) -> str:
    """Structured report: per-room metrics plus the average, keyed for stable diffs."""
    payload = {
        "strategy": report.strategy,
        "rooms": {str(m.room): _metrics_dict(m) for m in report.rooms},
        "average": _metrics_dict(report.aggregate),
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def sweep_table(param: str, rows: Sequence[SweepRow]) -> str:
    lines = [f"{param}\tstrategy\tmae_m\tacc"]
    for row in rows:
        lines.append(f"{row.value:.4f}\t{row.strategy.value}\t{_fmt(row.mae)}\t{_fmt(row.acc)}")
    return "\n".join(lines) + "\n"


def comparison_table(reports: Mapping[Strategy, EvalReport]) -> str:
    """One row per strategy and room (plus ``average``): MAE and ACC side by side."""
    lines = ["strategy\troom\tmae_m\tacc"]
    for strategy, report in reports.items():
        for m in [*report.rooms, report.aggregate]:
            room = "average" if m.room is None else str(m.room)
            lines.append(f"{Strategy(strategy).value}\t{room}\t{_fmt(m.mae)}\t{_fmt(m.acc)}")
    return "\n".join(lines) + "\n"


def learning_error_table(reports: Mapping[Strategy, EvalReport], baseline: Strategy = Strategy.ONE_HOT) -> str:
    """Learning error per strategy and room (then ``average``), with the reduction
    relative to the same room under ``baseline`` in percent."""
    base = reports.get(baseline)
    base_le = {}
    if base is not None:
        base_le = {m.room: m.learning_error for m in [*base.rooms, base.aggregate]}
    lines = ["strategy\troom\tmae_m\tub_mae_m\tlearning_error_m\treduction_pct"]
    for strategy, report in reports.items():
        for m in [*report.rooms, report.aggregate]:
            room = "average" if m.room is None else str(m.room)
            reduction = relative_reduction(base_le[m.room], m.learning_error) if m.room in base_le else None
            lines.append("\t".join([
                Strategy(strategy).value, room, _fmt(m.mae), _fmt(m.ub_mae),
                _fmt(m.learning_error), _fmt(reduction, 2),
            ]))
    return "\n".join(lines) + "\n"


def comparison_json(reports: Mapping[Strategy, EvalReport]) -> str:
    """Strategies x rooms x {MAE, ACC}, plus each strategy's average."""
    payload = {
        Strategy(strategy).value: {
            "rooms": {str(m.room): {"mae_m": round(m.mae, 6), "acc": round(m.acc, 6)} for m in report.rooms},
            "average": {"mae_m": round(report.aggregate.mae, 6), "acc": round(report.aggregate.acc, 6)},
        }
        for strategy, report in reports.items()
    }
    return json.dumps({"strategies": payload}, indent=2, sort_keys=True) + "\n"


def sparkline(values: Sequence[float]) -> str:
    """ASCII sparkline for a loss or accuracy history."""
    if not values or len(values) < 2:
        return "─"

    lo, hi = min(values), max(values)
    if hi == lo:
        return "▄" * len(values)

    chars = ['▁', '▂', '▃', '▄', '▅', '▆', '▇', '█']
    line = ""
    for value in values:
        normalized = (value - lo) / (hi - lo)
        line += chars[min(7, int(normalized * 8))]
    return line


def history_summary(history: Sequence[EpochRecord]) -> str:
    """Two-line trend summary appended to text reports."""
    if not history:
        return "no epochs recorded\n"
    loss = [r.loss for r in history]
    acc = [r.train_acc for r in history]
    return (
        f"loss      {sparkline(loss)}  {loss[0]:.4f} -> {loss[-1]:.4f}\n"
        f"train ACC {sparkline(acc)}  {acc[0]:.4f} -> {acc[-1]:.4f}\n"
    )
