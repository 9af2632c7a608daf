"""Command-line entry point: ``soft-label-loc <command> --config experiment.yaml``.

Every command works inside ``<out_dir>/run-<config hash>/``::

    config.yaml                  resolved config
    data/{train,valid,test}.slcd datasets (+ .summary.json sidecars)
    <STRATEGY>/checkpoint.slcm   model, Adam state and current DSLC codebook
    <STRATEGY>/history.tsv       per-epoch history
    <STRATEGY>/report.{tsv,json} evaluation report
    sweep-<param>.tsv            sweep table
    compare.{tsv,json}, learning_error.tsv
    results.db                   sqlite index of all of the above

Exit codes: 0 success, 1 usage, 2 validation, 3 runtime.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from soft_label_loc import __version__
from soft_label_loc.config import ExperimentConfig, Strategy, config_hash, derive_seed, dump_config, load_config, run_directory
from soft_label_loc.database import ResultsDatabase
from soft_label_loc.errors import (
    ConfigError,
    DimensionMismatchError,
    EmptyInputError,
    FormatError,
    InvalidConfigurationError,
    InvalidIndexError,
)
from soft_label_loc.evaluation import compare, evaluate, sweep
from soft_label_loc.exporters import (
    comparison_json,
    comparison_table,
    history_summary,
    history_table,
    learning_error_table,
    read_history_table,
    report_json,
    report_table,
    sweep_table,
)
from soft_label_loc.simulator import Dataset, Split, generate_dataset, sample_rooms
from soft_label_loc.storage import read_checkpoint, read_dataset, write_checkpoint, write_dataset
from soft_label_loc.training import TrainState, fit, resume_state

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3

VALIDATION_ERRORS = (ConfigError, InvalidConfigurationError, DimensionMismatchError, InvalidIndexError, EmptyInputError)

CHECKPOINT_FILE = "checkpoint.slcm"
HISTORY_FILE = "history.tsv"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="soft-label-loc", description="Soft label coding for grid-based sound source localization.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="experiment YAML file")
    common.add_argument("--seed-override", type=int, default=None, help="replace the master seed")
    common.add_argument("--out", default=None, help="replace out_dir")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("simulate", parents=[common], help="generate train/valid/test datasets")

    train = sub.add_parser("train", parents=[common], help="train the configured strategy")
    train.add_argument("--resume", action="store_true", help="continue from the stored checkpoint")

    ev = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint on a dataset")
    ev.add_argument("--checkpoint", default=None, help="checkpoint file (default: the run's trained strategy)")
    ev.add_argument("--dataset", default=None, help="dataset file (default: the run's test split)")

    sw = sub.add_parser("sweep", parents=[common], help="sweep alpha_s or alpha_d")
    sw.add_argument("--param", choices=["alpha_s", "alpha_d"], default=None)
    sw.add_argument("--values", default=None, help="comma-separated values")

    cmp_ = sub.add_parser("compare", parents=[common], help="train and evaluate every strategy")
    cmp_.add_argument("--seeds", type=int, default=None, help="number of seeds (median-aggregated)")

    serve = sub.add_parser("serve", help="run the tool server over stdio")
    serve.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    return parser


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s - %(levelname)s - %(name)s - %(message)s",
        stream=sys.stderr,
    )


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = load_config(args.config)
    updates = {}
    if args.seed_override is not None:
        if args.seed_override < 0:
            raise ConfigError(f"--seed-override must be non-negative, got {args.seed_override}")
        updates["seed"] = args.seed_override
    if args.out is not None:
        updates["out_dir"] = args.out
    return cfg.model_copy(update=updates) if updates else cfg


def _dataset_path(run: Path, split: Split) -> Path:
    return run / "data" / f"{split.value.lower()}.slcd"


def _load_split(run: Path, split: Split) -> Dataset:
    path = _dataset_path(run, split)
    if not path.exists():
        raise FormatError(f"{path} does not exist; run 'soft-label-loc simulate' with this config first")
    return read_dataset(path)


def _load_splits(run: Path) -> Tuple[Dataset, Dataset, Dataset]:
    return _load_split(run, Split.TRAIN), _load_split(run, Split.VALID), _load_split(run, Split.TEST)


def _open_db(cfg: ExperimentConfig, run: Path, command: str, strategy: Optional[str] = None) -> ResultsDatabase:
    db = ResultsDatabase(str(run / "results.db"))
    db.create_run(run.name, command, strategy, cfg.seed, cfg.model_dump(mode="json"))
    return db


def _emit(text: str) -> None:
    sys.stdout.write(text)
    sys.stdout.flush()


def cmd_simulate(cfg: ExperimentConfig) -> Path:
    sim = cfg.simulation
    shape = (sim.rows, sim.cols)
    train_rooms = sample_rooms(sim.train_rooms, sim.room_bounds, shape, derive_seed(cfg.seed, "rooms", "train"))
    test_rooms = sample_rooms(sim.test_rooms, sim.room_bounds, shape, derive_seed(cfg.seed, "rooms", "test"))
    plan = [
        (Split.TRAIN, train_rooms, sim.splits.train),
        (Split.VALID, train_rooms, sim.splits.valid),
        (Split.TEST, test_rooms, sim.splits.test),
    ]
    run = run_directory(cfg)
    run.mkdir(parents=True, exist_ok=True)
    (run / "config.yaml").write_text(dump_config(cfg), encoding="utf-8")
    for split, rooms, count in plan:
        dataset = generate_dataset(rooms, sim.scene, count, split, derive_seed(cfg.seed, "split", split.value))
        write_dataset(_dataset_path(run, split), dataset)
    _open_db(cfg, run, "simulate").close()
    logger.info("run directory %s (config hash %s)", run, config_hash(cfg))
    return run


def cmd_train(cfg: ExperimentConfig, resume: bool = False) -> TrainState:
    run = run_directory(cfg)
    train, valid, _ = _load_splits(run)
    train_cfg = cfg.train_config()
    out = run / train_cfg.strategy.value
    checkpoint_path = out / CHECKPOINT_FILE
    history_path = out / HISTORY_FILE

    state = None
    if resume:
        if checkpoint_path.exists():
            history = read_history_table(history_path.read_text(encoding="utf-8")) if history_path.exists() else []
            state = resume_state(train_cfg, train, read_checkpoint(checkpoint_path), history)
            logger.info("resuming %s from epoch %d", train_cfg.strategy.value, state.epoch)
        else:
            logger.warning("no checkpoint at %s; training from scratch", checkpoint_path)

    with _open_db(cfg, run, "train", train_cfg.strategy.value) as db:
        def _persist(current: TrainState) -> None:
            write_checkpoint(checkpoint_path, current)
            history_path.write_text(history_table(current.history), encoding="utf-8")
            db.record_epoch(run.name, current.history[-1])

        state = fit(train_cfg, train, valid, state=state, on_epoch=_persist)
    return state


def cmd_eval(cfg: ExperimentConfig, checkpoint: Optional[str] = None, dataset: Optional[str] = None):
    run = run_directory(cfg)
    ckpt_path = Path(checkpoint) if checkpoint else run / cfg.training.strategy.value / CHECKPOINT_FILE
    data = read_dataset(dataset) if dataset else _load_split(run, Split.TEST)
    ckpt = read_checkpoint(ckpt_path)
    report = evaluate(ckpt, data, cfg.evaluation.ub_samples, derive_seed(cfg.seed, "eval"))
    out = ckpt_path.parent
    (out / "report.tsv").write_text(report_table(report), encoding="utf-8")
    (out / "report.json").write_text(report_json(report), encoding="utf-8")
    with _open_db(cfg, run, "eval", report.strategy) as db:
        db.record_eval(run.name, report)
    logger.info("wrote %s and %s", out / "report.tsv", out / "report.json")
    return report


def _parse_values(text: str) -> List[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"--values must be comma-separated numbers: {exc}") from exc
    if not values:
        raise UsageError("--values is empty")
    return values


def cmd_sweep(cfg: ExperimentConfig, param: Optional[str] = None, values: Optional[Sequence[float]] = None):
    run = run_directory(cfg)
    train, valid, test = _load_splits(run)
    param = param or cfg.sweep.param
    values = list(values) if values is not None else cfg.sweep.values
    rows = sweep(param, values, cfg.train_config(), train, valid, test,
                 cfg.evaluation.ub_samples, derive_seed(cfg.seed, "eval"))
    table = sweep_table(param, rows)
    (run / f"sweep-{param}.tsv").write_text(table, encoding="utf-8")
    with _open_db(cfg, run, "sweep") as db:
        db.record_sweep(run.name, param, rows)
    return param, rows


def cmd_compare(cfg: ExperimentConfig, seeds: Optional[int] = None):
    run = run_directory(cfg)
    train, valid, test = _load_splits(run)
    seeds = seeds if seeds is not None else cfg.compare.seeds
    if seeds < 1:
        raise UsageError(f"--seeds must be at least 1, got {seeds}")
    strategies = [Strategy(s) for s in cfg.compare.strategies]
    reports = compare(strategies, seeds, cfg.train_config(), train, valid, test,
                      cfg.evaluation.ub_samples, derive_seed(cfg.seed, "eval"))
    table = comparison_table(reports)
    decomposition = learning_error_table(reports)
    (run / "compare.tsv").write_text(table, encoding="utf-8")
    (run / "compare.json").write_text(comparison_json(reports), encoding="utf-8")
    (run / "learning_error.tsv").write_text(decomposition, encoding="utf-8")
    with _open_db(cfg, run, "compare") as db:
        for report in reports.values():
            db.record_eval(run.name, report)
    return reports


def _dispatch(args: argparse.Namespace) -> None:
    if args.command == "serve":
        from soft_label_loc.server import main as serve_main

        serve_main()
        return
    cfg = resolve_config(args)
    if args.command == "simulate":
        cmd_simulate(cfg)
    elif args.command == "train":
        state = cmd_train(cfg, resume=args.resume)
        _emit(history_table(state.history))
        sys.stderr.write(history_summary(state.history))
    elif args.command == "eval":
        _emit(report_table(cmd_eval(cfg, args.checkpoint, args.dataset)))
    elif args.command == "sweep":
        param, rows = cmd_sweep(cfg, args.param, _parse_values(args.values) if args.values else None)
        _emit(sweep_table(param, rows))
    elif args.command == "compare":
        reports = cmd_compare(cfg, args.seeds)
        _emit(comparison_table(reports) + "\n" + learning_error_table(reports))


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.verbose)
    try:
        _dispatch(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:
        logger.debug("command failed", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
