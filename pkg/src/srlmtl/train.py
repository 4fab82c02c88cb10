"""Mixed-batch training loop, dev evaluation, checkpointing and the run log."""

from __future__ import annotations

import json
import math
import os
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

from .config import RunConfig
from .data.formats import read_conll2009, read_dep_treebank, read_span_props
from .data.resources import attach_external_reps, load_external_reps, load_word_embeddings
from .data.vocab import Vocabulary
from .evaluation import EvalReport, span_f1, word_f1
from .mtl import MTLSystem, make_plan, next_batch
from .nn.checkpoint import save_checkpoint
from .nn.optim import Adam, LRSchedule, TrainingError
from .parser import uas_las
from .srl import END_TO_END


class LockError(RuntimeError):
    pass


@dataclass
class TrainingState:
    step: int = 0
    best_dev: float = -1.0
    best_step: int = -1
    best_checkpoint: str | None = None
    loss_history: list = field(default_factory=list)  # (step, loss)
    recall_history: list = field(default_factory=list)  # (step, pruning recall %)
    dev_history: list = field(default_factory=list)  # (step, dev score, best so far)

    def record_dev(self, step: int, score: float) -> bool:
        improved = score > self.best_dev
        if improved:
            self.best_dev, self.best_step = score, step
        self.dev_history.append((step, score, self.best_dev))
        return improved


def read_srl(path: str, task: str):
    if task == "word":
        return read_conll2009(path)
    return read_span_props(f"{path}.words", f"{path}.props")


def load_corpora(cfg: RunConfig) -> dict:
    out = {"srl_train": [], "srl_dev": [], "dep_train": [], "dep_dev": []}
    if cfg.task != "dep":
        out["srl_train"] = read_srl(cfg.train, cfg.task)
        out["srl_dev"] = read_srl(cfg.dev, cfg.task) if cfg.dev else []
    if cfg.dep_train:
        out["dep_train"] = read_dep_treebank(cfg.dep_train)
    if cfg.dep_dev:
        out["dep_dev"] = read_dep_treebank(cfg.dep_dev)
    if cfg.ext_enabled:
        attach_external_reps(out["srl_train"], load_external_reps(cfg.ext_train, out["srl_train"]))
        if out["srl_dev"]:
            if not cfg.ext_dev:
                raise ValueError("ext_enabled with a dev corpus requires ext_dev")
            attach_external_reps(out["srl_dev"], load_external_reps(cfg.ext_dev, out["srl_dev"]))
    return out


def _batches(items, size):
    for i in range(0, len(items), size):
        yield items[i:i + size]


def predict_corpus(system: MTLSystem, sentences, batch_size: int = 16, setup: str | None = None):
    out = []
    for batch in _batches(sentences, batch_size):
        for s, frames in zip(batch, system.predict(batch, setup)):
            out.append(s.with_frames(frames))
    return out


def parse_corpus(system: MTLSystem, sentences, batch_size: int = 16):
    trees = []
    for batch in _batches(sentences, batch_size):
        trees += system.parse(batch)
    return trees


def evaluate_srl(system: MTLSystem, sentences, batch_size: int = 16, include_sense: bool = False) -> EvalReport:
    pred = predict_corpus(system, sentences, batch_size)
    if system.cfg.task == "word":
        return word_f1(sentences, pred, include_sense)
    return span_f1(sentences, pred, count_predicates=system.cfg.setup == END_TO_END)


def evaluate_dep(system: MTLSystem, sentences, batch_size: int = 16) -> tuple[float, float]:
    return uas_las(parse_corpus(system, sentences, batch_size), [s.gold_dep for s in sentences])


@contextmanager
def run_lock(out_dir: Path):
    lock = out_dir / "train.lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise LockError(f"{lock} exists: another training process owns this run directory") from None
    os.write(fd, str(os.getpid()).encode())
    os.close(fd)
    try:
        yield
    finally:
        lock.unlink(missing_ok=True)


class Trainer:
    """Runs the optimisation loop for one MTLSystem; writes nothing unless `out_dir` is given."""

    def __init__(self, system: MTLSystem, corpora: dict, *, lr: float = 1e-3, lr_decay: float = 1e-3,
                 lr_every: int = 100, clip_norm: float | None = 5.0, srl_batch: int = 8, dep_batch: int = 8,
                 eval_interval: int = 500, seed: int = 0, include_sense: bool = False, out_dir=None,
                 config_echo: dict | None = None, detach_syn: bool = False):
        self.system = system
        self.corpora = corpora
        self.schedule = LRSchedule(lr, lr_decay, lr_every)
        self.optim = Adam(clip_norm=clip_norm)
        self.plan = make_plan(system.cfg.mode, system.cfg.task, corpora.get("srl_train"), corpora.get("dep_train"),
                              srl_batch, dep_batch, seed)
        self.eval_interval = eval_interval
        self.include_sense = include_sense
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.config_echo = config_echo or {}
        self.detach_syn = detach_syn
        self.state = TrainingState()
        self._log_fh = None

    # ------------------------------------------------------------ logging / checkpoints

    def log(self, record: dict):
        if self._log_fh is not None:
            self._log_fh.write(json.dumps(record, sort_keys=True) + "\n")
            self._log_fh.flush()

    def save(self, name: str) -> str | None:
        if self.out_dir is None:
            return None
        meta = self.system.meta()
        meta["step"] = self.state.step
        path = self.out_dir / name
        tmp = path.with_suffix(".tmp")
        save_checkpoint(tmp, self.system.state(), meta)
        os.replace(tmp, path)
        return str(path)

    # ------------------------------------------------------------ evaluation

    def dev_score(self) -> dict:
        out = {}
        task = self.system.cfg.task
        if task != "dep" and self.corpora.get("srl_dev"):
            rep = evaluate_srl(self.system, self.corpora["srl_dev"], include_sense=self.include_sense)
            out.update(dev_p=rep.precision, dev_r=rep.recall, dev_f1=rep.f1)
        if self.system.parser is not None and self.system.cfg.mode != "FIR" and self.corpora.get("dep_dev"):
            uas, las = evaluate_dep(self.system, self.corpora["dep_dev"])
            out.update(dep_uas=uas, dep_las=las)
        return out

    def _selection(self, scores: dict) -> float | None:
        return scores.get("dep_uas") if self.system.cfg.task == "dep" else scores.get("dev_f1")

    def evaluate(self):
        scores = self.dev_score()
        fusion = {k: v.tolist() for k, v in self.system.fusion_weights().items()}
        sel = self._selection(scores)
        improved = False
        if sel is not None:
            improved = self.state.record_dev(self.state.step, sel)
        if improved or self.state.best_checkpoint is None:
            self.state.best_checkpoint = self.save("best.ckpt")
        self.log({"event": "eval", "step": self.state.step, **scores, "best": self.state.best_dev,
                  "fusion": fusion})
        return scores

    # ------------------------------------------------------------ loop

    def step(self) -> dict:
        srl_batch, dep_batch = next_batch(self.plan)
        self.system.train(True)
        loss, stats = self.system.step_loss(srl_batch, dep_batch, detach_syn=self.detach_syn)
        value = float(loss.data)
        if not math.isfinite(value):
            raise TrainingError(f"step {self.state.step + 1}: loss is {value}; stats {stats}")
        loss.backward()
        lr = self.schedule(self.state.step)
        self.optim.step(self.system.store, lr)
        self.state.step += 1
        self.state.loss_history.append((self.state.step, value))
        rec = {"event": "step", "step": self.state.step, "lr": lr, "loss": value}
        if stats.get("gold_args"):
            recall = 100.0 * stats["kept_args"] / stats["gold_args"]
            self.state.recall_history.append((self.state.step, recall))
            rec["pruning_recall"] = recall
        for k in ("srl_loss", "dep_loss"):
            if k in stats:
                rec[k] = stats[k]
        fusion = self.system.fusion_weights()
        if fusion:
            rec["fusion_sum"] = {k: float(v.sum()) for k, v in fusion.items()}
        self.log(rec)
        return rec

    def run(self, max_steps: int, target: float | None = None) -> TrainingState:
        """Train for `max_steps` updates; stops early once the dev selection score reaches `target`."""
        if self.out_dir is not None:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            with run_lock(self.out_dir), open(self.out_dir / "log.jsonl", "a", encoding="utf-8") as fh:
                self._log_fh = fh
                try:
                    return self._run(max_steps, target)
                finally:
                    self._log_fh = None
        return self._run(max_steps, target)

    def _run(self, max_steps: int, target: float | None) -> TrainingState:
        self.log({"event": "config", "config": self.config_echo, "seed": self.system.cfg.seed,
                  "params": self.system.store.num_values(), "time": time.strftime("%Y-%m-%dT%H:%M:%S")})
        self.save("latest.ckpt")
        if max_steps == 0:
            self.state.best_checkpoint = self.save("best.ckpt")
            return self.state
        while self.state.step < max_steps:
            self.step()
            if self.state.step % self.eval_interval == 0 or self.state.step == max_steps:
                self.evaluate()
                self.save("latest.ckpt")
                if target is not None and self.state.best_dev >= target:
                    break
        return self.state


def build_system(cfg: RunConfig, corpora: dict) -> MTLSystem:
    vocab = Vocabulary.build(corpora["srl_train"], corpora["dep_train"])
    pretrained = None
    if cfg.embeddings:
        pretrained = load_word_embeddings(cfg.embeddings, vocab, seed=cfg.seed, dim=cfg.word_dim)
    return MTLSystem(cfg.model_config(), vocab, fir_path=cfg.fir_checkpoint or None, pretrained=pretrained)


def train_from_config(cfg: RunConfig) -> TrainingState:
    corpora = load_corpora(cfg)
    system = build_system(cfg, corpora)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg.save(out / "config.json")
    trainer = Trainer(system, corpora, lr=cfg.lr, lr_decay=cfg.lr_decay, lr_every=cfg.lr_every,
                      clip_norm=cfg.clip_norm, srl_batch=cfg.srl_batch, dep_batch=cfg.dep_batch,
                      eval_interval=cfg.eval_interval, seed=cfg.seed, include_sense=cfg.include_sense,
                      out_dir=out, config_echo=cfg.to_dict())
    return trainer.run(cfg.max_steps)

