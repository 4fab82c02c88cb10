"""Syntax integration: implicit representations (IIR), hard sharing (HPS), frozen parser features (FIR)."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .data.vocab import Vocabulary
from .encoder import ConfigError, EncoderConfig
from .nn import autodiff as ad
from .nn.autodiff import ShapeError, Tensor
from .nn.checkpoint import CheckpointError, load_checkpoint
from .nn.dropout import Dropout, DropoutPlan
from .nn.optim import ParameterStore
from .parser import BiaffineParser, ParserConfig
from .srl import GOLD_PREDICATES, SRLConfig, SRLModel

MODES = ("none", "IIR", "HPS", "FIR")


class LoadError(ValueError):
    pass


def syn_rep(layers: list[Tensor], logits: Tensor) -> Tensor:
    """sum_j softmax(logits)_j * layers[j]."""
    logits = ad.as_tensor(logits)
    if len(layers) != logits.shape[0]:
        raise ShapeError("syn-rep", (len(layers),), logits.shape)
    if any(l.shape != layers[0].shape for l in layers):
        raise ShapeError("syn-rep", *[l.shape for l in layers])
    w = ad.softmax(logits, axis=0)
    out = ad.mul(layers[0], w[0])
    for j in range(1, len(layers)):
        out = ad.add(out, ad.mul(layers[j], w[j]))
    return out


def joint_loss(srl_loss: Tensor, dep_loss: Tensor | None, alpha: float) -> Tensor:
    """L = L_srl + alpha * L_dep."""
    if dep_loss is None:
        return srl_loss
    return ad.add(srl_loss, ad.scale(dep_loss, alpha))


class BatchScheduler:
    """Seeded epoch cursor over one corpus. The last batch of an epoch may be short; the next draw reshuffles."""

    def __init__(self, corpus, batch_size: int, seed: int, name: str = "corpus"):
        if not corpus:
            raise ConfigError(f"{name} is empty")
        if batch_size < 1:
            raise ConfigError(f"{name} batch size must be >= 1")
        self.corpus = list(corpus)
        self.batch_size = batch_size
        self.rng = np.random.default_rng(seed)
        self.order = self.rng.permutation(len(self.corpus))
        self.cursor = 0
        self.epoch = 0

    def next(self) -> list:
        if self.cursor >= len(self.order):
            self.order = self.rng.permutation(len(self.corpus))
            self.cursor = 0
            self.epoch += 1
        idx = self.order[self.cursor:self.cursor + self.batch_size]
        self.cursor += len(idx)
        return [self.corpus[i] for i in idx]


@dataclass
class BatchPlan:
    srl: BatchScheduler | None
    dep: BatchScheduler | None = None


def make_plan(mode: str, task: str, srl_corpus, dep_corpus, srl_batch: int, dep_batch: int, seed: int) -> BatchPlan:
    if task == "dep":
        return BatchPlan(None, BatchScheduler(dep_corpus, dep_batch, seed * 2 + 1, "dependency training data"))
    srl = BatchScheduler(srl_corpus, srl_batch, seed * 2, "SRL training data")
    dep = None
    if mode in ("IIR", "HPS"):
        dep = BatchScheduler(dep_corpus, dep_batch, seed * 2 + 1, "dependency training data")
    return BatchPlan(srl, dep)


def next_batch(plan: BatchPlan):
    """(srl instances, dependency instances); either side is None when the plan has no such corpus."""
    return (plan.srl.next() if plan.srl else None), (plan.dep.next() if plan.dep else None)


def assemble_hps(store: ParameterStore, srl: SRLModel, vocab: Vocabulary, enc_cfg: EncoderConfig,
                 parser_cfg: ParserConfig, rng, dropout=None) -> BiaffineParser:
    """A parser whose embeddings, char CNN and BiLSTM are the SRL model's own objects."""
    if asdict(enc_cfg) != asdict(srl.encoder.cfg) or srl.encoder.extra_dim:
        raise ConfigError("hard sharing needs identical encoder configurations and no extra SRL input")
    return BiaffineParser(store, vocab, enc_cfg, parser_cfg, rng, dropout, encoder=srl.encoder)


@dataclass
class ModelConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    srl: SRLConfig = field(default_factory=SRLConfig)
    parser: ParserConfig = field(default_factory=ParserConfig)
    dropout: DropoutPlan = field(default_factory=DropoutPlan)
    mode: str = "none"
    alpha_loss: float = 1.0
    setup: str = GOLD_PREDICATES
    task: str = "span"  # span | word | dep
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown integration mode {self.mode!r}; expected one of {MODES}")
        if self.alpha_loss < 0:
            raise ConfigError("alpha_loss must be >= 0")
        if self.task not in ("span", "word", "dep"):
            raise ConfigError(f"unknown task {self.task!r}")
        if self.task == "word":
            self.srl.word_mode = True
            self.srl.max_width = 1

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(encoder=EncoderConfig(**d["encoder"]), srl=SRLConfig(**d["srl"]),
                   parser=ParserConfig(**d["parser"]), dropout=DropoutPlan(**d["dropout"]),
                   mode=d["mode"], alpha_loss=d["alpha_loss"], setup=d["setup"], task=d["task"], seed=d["seed"])


def load_fir(path, store: ParameterStore | None = None) -> BiaffineParser:
    """Rebuild a trained parser from its checkpoint; its parameters live in `store` (kept out of any optimizer)."""
    try:
        state, meta = load_checkpoint(path)
        cfg = ModelConfig.from_dict(meta["config"])
        vocab = Vocabulary.from_dict(meta["vocab"])
    except (OSError, KeyError, TypeError, CheckpointError) as exc:
        raise LoadError(f"{path}: not a parser checkpoint ({exc})") from None
    store = store if store is not None else ParameterStore()
    parser = BiaffineParser(store, vocab, cfg.encoder, cfg.parser, np.random.default_rng(0))
    missing = [n for n in parser.param_names if n not in state]
    if missing:
        raise LoadError(f"{path}: checkpoint lacks parser parameters, e.g. {missing[0]!r}")
    for name in parser.param_names:
        if state[name].shape != store[name].shape:
            raise LoadError(f"{path}: {name} has shape {state[name].shape}, expected {store[name].shape}")
        store[name].data[...] = state[name]
    for name, t in store.frozen.items():
        if name in state:
            t.data[...] = state[name]
    return parser


class MTLSystem:
    """An SRL model, optionally joined to a biaffine parser by one of the integration modes."""

    def __init__(self, cfg: ModelConfig, vocab: Vocabulary, fir_path=None, pretrained=None,
                 fir_parser: BiaffineParser | None = None, fir_store: ParameterStore | None = None):
        self.cfg = cfg
        self.vocab = vocab
        self.store = ParameterStore()
        self.frozen_store = fir_store if fir_store is not None else ParameterStore()
        self.dropout = Dropout(cfg.dropout, np.random.default_rng([cfg.seed, 2]))
        srl_rng = np.random.default_rng([cfg.seed, 0])
        parser_rng = np.random.default_rng([cfg.seed, 1])
        self.syn_logits = None
        self.parser = None
        self.srl = None
        mode = cfg.mode
        if cfg.task == "dep":
            if mode != "none":
                raise ConfigError("parser-only training uses integration mode 'none'")
            self.parser = BiaffineParser(self.store, vocab, cfg.encoder, cfg.parser, parser_rng, self.dropout,
                                         pretrained=pretrained)
            return
        if mode == "IIR":
            self.parser = BiaffineParser(self.store, vocab, cfg.encoder, cfg.parser, parser_rng, self.dropout,
                                         pretrained=pretrained)
            self.syn_logits = self.store.add("bridge.syn_logits", np.zeros(cfg.encoder.layers))
            extra = cfg.encoder.output_dim
        elif mode == "FIR":
            if fir_parser is None:
                if fir_path is None:
                    raise ConfigError("FIR needs a parser checkpoint")
                fir_parser = load_fir(fir_path, self.frozen_store)
            self.parser = fir_parser
            self.parser.dropout = None
            self.parser.encoder.dropout = None
            self.syn_logits = self.store.add("bridge.syn_logits", np.zeros(fir_parser.encoder.cfg.layers))
            extra = fir_parser.encoder.cfg.output_dim
        else:
            extra = 0
        self.srl = SRLModel(self.store, vocab, cfg.encoder, cfg.srl, srl_rng, self.dropout, extra_dim=extra,
                            pretrained=pretrained)
        if mode == "HPS":
            self.parser = assemble_hps(self.store, self.srl, vocab, cfg.encoder, cfg.parser, parser_rng,
                                       self.dropout)

    # ------------------------------------------------------------ helpers

    def train(self, flag: bool = True):
        self.dropout.training = flag

    def parser_vocab(self) -> Vocabulary:
        return self.parser.vocab if self.parser is not None else self.vocab

    def syntactic_features(self, batch, detach: bool = False) -> Tensor | None:
        if self.cfg.mode not in ("IIR", "FIR"):
            return None
        if self.cfg.mode == "FIR" or detach:
            with ad.no_grad():
                layers = [Tensor(l.data) for l in self.parser.encoder(batch).layers]
        else:
            layers = self.parser.encoder(batch).layers
        return syn_rep(layers, self.syn_logits)

    def fusion_weights(self) -> dict[str, np.ndarray]:
        out = {}
        if self.syn_logits is not None:
            out["syn"] = ad._softmax(self.syn_logits.data, 0)
        for model in (self.srl, self.parser):
            if model is not None and model.encoder.ext_logits is not None:
                out[f"{model.encoder.prefix}.ext"] = ad._softmax(model.encoder.ext_logits.data, 0)
        return out

    # ------------------------------------------------------------ objective

    def step_loss(self, srl_batch, dep_batch=None, detach_syn: bool = False):
        """Joint loss on one mixed batch; returns (loss, stats)."""
        stats = {}
        if self.cfg.task == "dep":
            loss = self.parser.loss(dep_batch)
            stats["dep_loss"] = float(loss.data)
            return loss, stats
        extra = self.syntactic_features(srl_batch, detach=detach_syn)
        srl_loss, st = self.srl.loss(srl_batch, self.cfg.setup, extra)
        stats.update(st)
        stats["srl_loss"] = float(srl_loss.data)
        dep_loss = None
        if self.cfg.mode in ("IIR", "HPS") and dep_batch:
            dep_loss = self.parser.loss(dep_batch)
            stats["dep_loss"] = float(dep_loss.data)
        return joint_loss(srl_loss, dep_loss, self.cfg.alpha_loss), stats

    def predict(self, batch, setup: str | None = None):
        setup = setup or self.cfg.setup
        prev = self.dropout.training
        self.train(False)
        try:
            with ad.no_grad():
                extra = self.syntactic_features(batch)
                frames = self.srl.predict(batch, setup, extra)
        finally:
            self.train(prev)
        return frames

    def parse(self, batch):
        prev = self.dropout.training
        self.train(False)
        try:
            return self.parser.parse(batch)
        finally:
            self.train(prev)

    # ------------------------------------------------------------ checkpoints

    def state(self) -> dict[str, np.ndarray]:
        return {**self.store.full_state(), **self.frozen_store.full_state()}

    def load_state(self, state):
        for st in (self.store, self.frozen_store):
            st.load_state(state)

    def meta(self) -> dict:
        meta = {"config": self.cfg.to_dict(), "vocab": self.vocab.to_dict()}
        if self.cfg.mode == "FIR":
            meta["parser_config"] = {"encoder": asdict(self.parser.encoder.cfg), "parser": asdict(self.parser.cfg)}
            meta["parser_vocab"] = self.parser.vocab.to_dict()
        return meta

    @classmethod
    def from_checkpoint(cls, path) -> "MTLSystem":
        try:
            state, meta = load_checkpoint(path)
            cfg = ModelConfig.from_dict(meta["config"])
            vocab = Vocabulary.from_dict(meta["vocab"])
        except (OSError, KeyError, TypeError, CheckpointError) as exc:
            raise LoadError(f"{path}: cannot load checkpoint ({exc})") from None
        fir_parser = None
        if cfg.mode == "FIR":
            pc = meta["parser_config"]
            frozen = ParameterStore()
            fir_parser = BiaffineParser(frozen, Vocabulary.from_dict(meta["parser_vocab"]),
                                        EncoderConfig(**pc["encoder"]), ParserConfig(**pc["parser"]),
                                        np.random.default_rng(0))
        system = cls(cfg, vocab, fir_parser=fir_parser, fir_store=frozen if fir_parser is not None else None)
        try:
            system.load_state(state)
        except (KeyError, ValueError) as exc:
            raise LoadError(f"{path}: incompatible checkpoint ({exc})") from None
        return system

