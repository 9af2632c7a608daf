"""Experiment configuration: YAML file, pydantic validation, seed derivation.

Example file (every key optional; these are the desk-scale defaults)::

    version: 1
    seed: 0
    out_dir: runs
    simulation:
      rows: 8
      cols: 8
      room_bounds: [4.0, 10.0]
      train_rooms: 10
      test_rooms: 5
      splits: {train: 2000, valid: 500, test: 500}
      scene: {node_count: 30, feature_dim: 2, noise_std: 0.001, reverb_blur: 0.002}
    training:
      strategy: DSLC_SSLC_CONST
      alpha_s: 2.8
      alpha_d: 0.5
      epochs: 40
    evaluation: {ub_samples: 100000}
    compare: {seeds: 1}
    sweep: {param: alpha_s, values: [2.6, 2.7, 2.8, 2.9, 3.0]}
"""
import hashlib
import json
import logging
from enum import Enum
from pathlib import Path
from typing import Any, List, Literal, Optional, Sequence, Tuple, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from soft_label_loc.errors import ConfigError

logger = logging.getLogger(__name__)

CONFIG_VERSION = 1


class Strategy(str, Enum):
    """Label strategies. The first six are the standard comparison set."""
    ONE_HOT = "ONE_HOT"
    SSLC = "SSLC"
    DSLC_ONEHOT_CONST = "DSLC_ONEHOT_CONST"
    DSLC_SSLC_CONST = "DSLC_SSLC_CONST"
    DSLC_ONEHOT_ADAPTIVE = "DSLC_ONEHOT_ADAPTIVE"
    DSLC_SSLC_ADAPTIVE = "DSLC_SSLC_ADAPTIVE"
    LABEL_SMOOTHING = "LABEL_SMOOTHING"
    DSLC_ONLY = "DSLC_ONLY"

    @property
    def uses_dslc(self) -> bool:
        return self.name.startswith("DSLC")

    @property
    def adaptive(self) -> bool:
        return self.name.endswith("_ADAPTIVE")

    @property
    def uses_sslc(self) -> bool:
        return self in (Strategy.SSLC, Strategy.DSLC_SSLC_CONST, Strategy.DSLC_SSLC_ADAPTIVE)


STANDARD_STRATEGIES: Tuple[Strategy, ...] = (
    Strategy.ONE_HOT,
    Strategy.SSLC,
    Strategy.DSLC_ONEHOT_CONST,
    Strategy.DSLC_SSLC_CONST,
    Strategy.DSLC_ONEHOT_ADAPTIVE,
    Strategy.DSLC_SSLC_ADAPTIVE,
)


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SimConfig(_Section):
    """Per-scene synthesis parameters."""
    node_count: int = Field(30, ge=1)
    feature_dim: int = Field(2, ge=2)
    noise_std: float = Field(0.001, ge=0.0)
    reverb_blur: float = Field(0.002, ge=0.0)
    speed_of_sound: float = Field(343.0, gt=0.0)

    @field_validator("feature_dim")
    @classmethod
    def _even_feature_dim(cls, value: int) -> int:
        if value % 2:
            raise ValueError("feature_dim must be even (delay/attenuation pairs)")
        return value

    @property
    def frames(self) -> int:
        return self.feature_dim // 2


class Splits(_Section):
    train: int = Field(2000, ge=1)
    valid: int = Field(500, ge=1)
    test: int = Field(500, ge=1)


class SimulationSection(_Section):
    rows: int = Field(8, ge=1)
    cols: int = Field(8, ge=1)
    room_bounds: Tuple[float, float] = (4.0, 10.0)
    train_rooms: int = Field(10, ge=1)
    test_rooms: int = Field(5, ge=1)
    splits: Splits = Splits()
    scene: SimConfig = SimConfig()

    @field_validator("room_bounds")
    @classmethod
    def _ordered_bounds(cls, value: Tuple[float, float]) -> Tuple[float, float]:
        low, high = value
        if not 0.0 < low <= high:
            raise ValueError(f"room_bounds must satisfy 0 < low <= high, got [{low}, {high}]")
        return value

    @model_validator(mode="after")
    def _nodes_fit_grid(self) -> "SimulationSection":
        n = self.rows * self.cols
        if self.scene.node_count > n - 1:
            raise ValueError(
                f"scene.node_count={self.scene.node_count} exceeds the {n - 1} areas left "
                f"beside the source on a {self.rows}x{self.cols} grid"
            )
        return self

    @property
    def n(self) -> int:
        return self.rows * self.cols


class TrainConfig(_Section):
    strategy: Strategy = Strategy.DSLC_SSLC_CONST
    alpha_s: float = Field(2.8, gt=0.0)
    alpha_d: float = Field(0.5, gt=0.0, lt=1.0)
    epsilon_init: float = Field(0.1, gt=0.0, lt=1.0)
    epochs: int = Field(40, ge=1)
    batch_size: int = Field(32, ge=1)
    learning_rate: float = Field(1e-3, gt=0.0)
    beta1: float = Field(0.9, ge=0.0, lt=1.0)
    beta2: float = Field(0.999, ge=0.0, lt=1.0)
    adam_eps: float = Field(1e-8, gt=0.0)
    hidden: int = Field(64, ge=1)
    seed: Optional[int] = Field(None, ge=0)


class EvaluationSection(_Section):
    ub_samples: int = Field(100_000, ge=1)


class CompareSection(_Section):
    seeds: int = Field(1, ge=1)
    strategies: List[Strategy] = Field(default_factory=lambda: list(STANDARD_STRATEGIES))


class SweepSection(_Section):
    param: Literal["alpha_s", "alpha_d"] = "alpha_s"
    values: List[float] = Field(default_factory=lambda: [2.6, 2.7, 2.8, 2.9, 3.0], min_length=1)


class ExperimentConfig(_Section):
    version: Literal[1] = CONFIG_VERSION
    seed: int = Field(0, ge=0)
    out_dir: str = "runs"
    simulation: SimulationSection = SimulationSection()
    training: TrainConfig = TrainConfig()
    evaluation: EvaluationSection = EvaluationSection()
    compare: CompareSection = CompareSection()
    sweep: SweepSection = SweepSection()

    def train_config(self, **updates: Any) -> TrainConfig:
        """Training section with its seed derived from the master seed unless set explicitly."""
        cfg = self.training
        if cfg.seed is None:
            cfg = cfg.model_copy(update={"seed": derive_seed(self.seed, "train")})
        return cfg.model_copy(update=updates) if updates else cfg


def derive_seed(master: int, *tags: Union[str, int]) -> int:
    """Sub-seed = first four bytes of sha256("master|tag|...") as a big-endian uint32."""
    key = "|".join([str(master), *(str(t) for t in tags)])
    return int.from_bytes(hashlib.sha256(key.encode("utf-8")).digest()[:4], "big")


def config_hash(cfg: ExperimentConfig) -> str:
    payload = json.dumps(cfg.model_dump(mode="json", exclude={"out_dir"}), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]


def run_directory(cfg: ExperimentConfig) -> Path:
    return Path(cfg.out_dir) / f"run-{config_hash(cfg)}"


def _line_of(node: Optional[yaml.Node], loc: Sequence[Union[str, int]]) -> Optional[int]:
    """1-based line of the deepest node along ``loc`` that exists in the document."""
    if node is None:
        return None
    line = node.start_mark.line + 1
    for key in loc:
        if isinstance(node, yaml.MappingNode):
            for key_node, value_node in node.value:
                if key_node.value == key:
                    line = key_node.start_mark.line + 1
                    node = value_node
                    break
            else:
                break
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
            line = node.start_mark.line + 1
        else:
            break
    return line


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    try:
        data = yaml.safe_load(text)
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}" if mark is not None else source
        raise ConfigError(f"{where}: malformed YAML: {getattr(exc, 'problem', exc)}") from exc

    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{source}:1: top level must be a mapping")

    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        lines = []
        for err in exc.errors():
            loc = [part for part in err["loc"] if not isinstance(part, str) or not part.startswith("function-")]
            line = _line_of(root, loc)
            field = ".".join(str(part) for part in loc) or "<root>"
            lines.append(f"{source}:{line or 1}: {field}: {err['msg']}")
        raise ConfigError("invalid config:\n  " + "\n  ".join(lines)) from exc


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    cfg = parse_config(text, source=str(path))
    logger.debug("loaded config %s (hash %s)", path, config_hash(cfg))
    return cfg


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=False)
