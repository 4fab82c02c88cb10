"""Run configuration: one flat JSON key/value file, overridable from the command line."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .encoder import ConfigError, EncoderConfig
from .mtl import MODES, ModelConfig
from .nn.dropout import DropoutPlan
from .parser import ParserConfig
from .srl import END_TO_END, GOLD_PREDICATES, SRLConfig

TASKS = ("span", "word", "dep")
SETUPS = (END_TO_END, GOLD_PREDICATES)

# step budgets for full-scale runs; desk-scale runs set max_steps explicitly
PRESETS = {
    "baseline": {"max_steps": 180_000},
    "mtl": {"max_steps": 100_000},
    "desk": {"word_dim": 32, "char_dim": 16, "char_channels": 16, "hidden": 64, "layers": 2,
             "mlp_hidden": 64, "arc_dim": 64, "label_dim": 32, "max_steps": 2000, "eval_interval": 250},
}


@dataclass
class RunConfig:
    task: str = "span"
    setup: str = GOLD_PREDICATES
    integration: str = "none"
    # corpora: span task reads <prefix>.words + <prefix>.props, word task CoNLL-2009, dependencies CoNLL-X
    train: str = ""
    dev: str = ""
    dep_train: str = ""
    dep_dev: str = ""
    embeddings: str = ""
    ext_enabled: bool = False
    ext_train: str = ""
    ext_dev: str = ""
    ext_k: int = 4
    ext_dim: int = 0
    fir_checkpoint: str = ""
    # model
    word_dim: int = 100
    char_dim: int = 100
    char_windows: list = field(default_factory=lambda: [3, 4, 5])
    char_channels: int = 100
    layers: int = 3
    hidden: int = 300
    mlp_hidden: int = 150
    arc_dim: int = 500
    label_dim: int = 100
    lambda_p: float = 0.4
    lambda_a: float = 0.8
    max_width: int = 30
    force_gold: bool = False  # training only: add pruned-away gold candidates back
    dropout_embedding: float = 0.5
    dropout_hidden: float = 0.2
    dropout_recurrent: float = 0.4
    alpha_loss: float = 1.0
    include_sense: bool = False
    # optimisation
    lr: float = 1e-3
    lr_decay: float = 1e-3
    lr_every: int = 100
    clip_norm: float = 5.0
    max_steps: int = 180_000
    eval_interval: int = 500
    srl_batch: int = 8
    dep_batch: int = 8
    seed: int = 0
    output_dir: str = "runs/default"

    def validate(self) -> "RunConfig":
        problems = []
        if self.task not in TASKS:
            problems.append(f"task must be one of {TASKS}, got {self.task!r}")
        if self.setup not in SETUPS:
            problems.append(f"setup must be one of {SETUPS}, got {self.setup!r}")
        if self.integration not in MODES:
            problems.append(f"integration must be one of {MODES}, got {self.integration!r}")
        for name in ("lambda_p", "lambda_a"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                problems.append(f"{name} must lie in (0, 1], got {v}")
        if self.max_width < 1:
            problems.append("max_width must be >= 1")
        if self.integration == "FIR" and not self.fir_checkpoint:
            problems.append("integration FIR requires fir_checkpoint")
        if self.integration in ("IIR", "HPS") and not self.dep_train:
            problems.append(f"integration {self.integration} requires dep_train")
        if self.task == "dep" and self.integration != "none":
            problems.append("task dep trains the parser alone; use integration none")
        if self.task == "dep" and not self.dep_train:
            problems.append("task dep requires dep_train")
        if self.task != "dep" and not self.train:
            problems.append("train corpus path is required")
        if self.ext_enabled and (not self.ext_train or self.ext_dim < 1 or self.ext_k < 1):
            problems.append("ext_enabled requires ext_train, ext_k >= 1 and ext_dim >= 1")
        for name in ("dropout_embedding", "dropout_hidden", "dropout_recurrent"):
            if not 0 <= getattr(self, name) < 1:
                problems.append(f"{name} must lie in [0, 1)")
        if self.alpha_loss < 0:
            problems.append("alpha_loss must be >= 0")
        if self.lr <= 0 or self.lr_every < 1 or not 0 <= self.lr_decay < 1:
            problems.append("lr must be > 0, lr_every >= 1 and lr_decay in [0, 1)")
        if self.max_steps < 0 or self.eval_interval < 1 or self.srl_batch < 1 or self.dep_batch < 1:
            problems.append("max_steps >= 0, eval_interval >= 1 and batch sizes >= 1 are required")
        if problems:
            raise ConfigError("; ".join(problems))
        if self.task == "word":
            self.max_width = 1
        try:
            self.model_config()
        except (ConfigError, TypeError) as exc:
            raise ConfigError(str(exc)) from None
        return self

    def model_config(self) -> ModelConfig:
        enc = EncoderConfig(self.word_dim, self.char_dim, tuple(self.char_windows), self.char_channels, self.layers,
                            self.hidden, self.ext_enabled, self.ext_k, self.ext_dim)
        srl = SRLConfig(self.mlp_hidden, self.lambda_p, self.lambda_a, self.max_width, self.task == "word",
                        self.force_gold)
        return ModelConfig(enc, srl, ParserConfig(self.arc_dim, self.label_dim),
                           DropoutPlan(self.dropout_embedding, self.dropout_hidden, self.dropout_recurrent),
                           mode=self.integration, alpha_loss=self.alpha_loss, setup=self.setup, task=self.task,
                           seed=self.seed)

    def to_dict(self) -> dict:
        return asdict(self)

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def _coerce(name: str, raw, kind):
    if not isinstance(raw, str):
        return raw
    if kind is bool or kind == "bool":
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
    if kind in (int, "int"):
        return int(raw)
    if kind in (float, "float"):
        return float(raw)
    if kind in (list, "list"):
        return [int(x) for x in raw.split(",")]
    return raw


def build_config(path=None, overrides: dict | None = None, preset: str | None = None) -> RunConfig:
    """Defaults < preset < config file < overrides; unknown keys are rejected."""
    known = {f.name: f.type for f in fields(RunConfig)}
    values: dict = {}
    if preset:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; available: {sorted(PRESETS)}")
        values.update(PRESETS[preset])
    if path:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        values.update(data)
    values.update(overrides or {})
    unknown = sorted(set(values) - set(known))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    try:
        values = {k: _coerce(k, v, known[k]) for k, v in values.items()}
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return RunConfig(**values).validate()
