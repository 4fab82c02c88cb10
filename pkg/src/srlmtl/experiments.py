"""Desk-scale experiments on synthetic data: overfit checks and the baseline-vs-IIR comparison."""

from __future__ import annotations

from dataclasses import dataclass

from .config import build_config
from .data.synthetic import gen_synthetic
from .data.vocab import Vocabulary
from .mtl import MTLSystem
from .train import Trainer, evaluate_dep, evaluate_srl


def desk_system(mode: str, corpora: dict, seed: int = 0, task: str = "span", **overrides) -> MTLSystem:
    needs_dep = mode in ("IIR", "HPS") or task == "dep"
    placeholders = {"train": "-" if task != "dep" else "", "dep_train": "-" if needs_dep else ""}
    cfg = build_config(preset="desk", overrides={**placeholders, "integration": mode, "task": task, "seed": seed,
                                                 **overrides})
    vocab = Vocabulary.build(corpora.get("srl_train", []), corpora.get("dep_train", []))
    return MTLSystem(cfg.model_config(), vocab)


def overfit_srl(seed: int = 0, max_steps: int = 2000, target: float = 99.0, sentences: int = 50, lr: float = 2e-3):
    """Baseline SRL fitted to a seeded synthetic corpus and scored on that corpus.

    Returns (best F1, step reached, TrainingState).
    """
    corp = gen_synthetic("simple", seed=seed, srl_train=sentences, srl_dev=0)
    corpora = {"srl_train": corp.srl_train, "srl_dev": corp.srl_train}
    system = desk_system("none", corpora, seed)
    trainer = Trainer(system, corpora, lr=lr, srl_batch=8, eval_interval=250, seed=seed)
    state = trainer.run(max_steps, target=target)
    return state.best_dev, state.best_step, state


def overfit_parser(seed: int = 0, max_steps: int = 500, sentences: int = 10, eval_interval: int = 25):
    """Parser alone on a small treebank, scored on that same treebank; returns (UAS, step reached)."""
    corp = gen_synthetic("simple", seed=seed, srl_train=1, srl_dev=0, dep_train=sentences)
    corpora = {"dep_train": corp.dep_train, "dep_dev": corp.dep_train}
    system = desk_system("none", corpora, seed, task="dep")
    trainer = Trainer(system, corpora, dep_batch=8, eval_interval=eval_interval, seed=seed)
    state = trainer.run(max_steps, target=100.0)
    return evaluate_dep(system, corp.dep_train)[0], state.best_step


@dataclass
class DirectionalResult:
    seed: int
    baseline_f1: float
    iir_f1: float


def directional_mtl(seed: int, steps: int = 1000, srl_train: int = 30, dep_train: int = 300, test: int = 200,
                    log=None) -> DirectionalResult:
    """Train the syntax-free baseline and IIR on the same scarce SRL data; score both on held-out sentences.

    Roles in the "hard" synthetic preset follow the dependency structure, so the extra treebank is informative.
    Both systems are scored after the final step (no dev-based selection).
    """
    corp = gen_synthetic("hard", seed=seed, srl_train=srl_train, srl_dev=0, srl_test=test, dep_train=dep_train)
    corpora = {"srl_train": corp.srl_train, "dep_train": corp.dep_train}
    scores = {}
    for mode in ("none", "IIR"):
        system = desk_system(mode, corpora, seed)
        trainer = Trainer(system, corpora, srl_batch=8, dep_batch=8, seed=seed)
        for _ in range(steps):
            trainer.step()
        scores[mode] = evaluate_srl(system, corp.srl_test).f1
        if log:
            log(f"seed {seed} {mode:>4}: held-out F1 {scores[mode]:.2f}")
    return DirectionalResult(seed, scores["none"], scores["IIR"])
