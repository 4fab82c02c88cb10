"""Command line: train, predict, evaluate, compare, gen-synthetic.

Exit codes: 0 ok, 2 usage/config, 3 input data, 4 checkpoint load, 5 training abort, 6 run directory locked.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

from .config import PRESETS, RunConfig, build_config
from .data.formats import write_conll2009, write_dep_treebank, write_span_props
from .data.synthetic import gen_synthetic, to_word_based
from .data.types import AlignmentError, ParseError, TreeError
from .encoder import ConfigError
from .evaluation import breakdown_by_length, significance, span_f1, word_f1, write_report, sentence_scatter
from .mtl import LoadError, MTLSystem
from .nn.checkpoint import CheckpointError
from .nn.optim import TrainingError
from .srl import END_TO_END, GOLD_PREDICATES
from .train import LockError, predict_corpus, read_srl, train_from_config

EXIT = {ConfigError: 2, ParseError: 3, AlignmentError: 3, TreeError: 3, LoadError: 4, CheckpointError: 4,
        TrainingError: 5, LockError: 6}
CATEGORY = {2: "config", 3: "data", 4: "load", 5: "training", 6: "lock"}


class UsageError(ConfigError):
    pass


def _categorize(exc: BaseException) -> int:
    for cls in type(exc).__mro__:
        if cls in EXIT:
            return EXIT[cls]
    if isinstance(exc, (FileNotFoundError, IsADirectoryError)):
        return 3
    return 1


# ------------------------------------------------------------------ train

def cmd_train(args) -> int:
    overrides = dict(kv.split("=", 1) for kv in args.set or [])
    for f in fields(RunConfig):
        v = getattr(args, f"cfg_{f.name}", None)
        if v is not None:
            overrides[f.name] = v
    cfg = build_config(args.config, overrides, args.preset)
    for name in ("train", "dev", "dep_train", "dep_dev", "embeddings", "ext_train", "ext_dev", "fir_checkpoint"):
        paths = [getattr(cfg, name)]
        if name in ("train", "dev") and cfg.task == "span" and paths[0]:
            paths = [paths[0] + ".words", paths[0] + ".props"]
        for p in paths:
            if p and not Path(p).is_file():
                raise UsageError(f"{name}: no such file {p}")
    state = train_from_config(cfg)
    summary = {"steps": state.step, "best_dev": state.best_dev, "best_step": state.best_step,
               "best_checkpoint": state.best_checkpoint}
    print(json.dumps(summary, sort_keys=True))
    return 0


# ------------------------------------------------------------------ predict

def cmd_predict(args) -> int:
    system = MTLSystem.from_checkpoint(args.checkpoint)
    task = system.cfg.task
    if task == "dep":
        raise UsageError("predict handles SRL checkpoints; this one holds a parser only")
    setup = args.setup or system.cfg.setup
    gold = read_srl(args.input, task)
    if system.cfg.encoder.ext_enabled:
        raise UsageError("prediction with external representations needs them attached; not supported here")
    pred = predict_corpus(system, gold, setup=setup) if gold else []
    if task == "word":
        # pass the input senses through: sense disambiguation is outside the model
        pred = [_with_senses(p, g) for p, g in zip(pred, gold)]
        write_conll2009(args.output, pred)
    else:
        write_span_props(f"{args.output}.words", f"{args.output}.props", pred)
    print(f"wrote {len(pred)} sentences")
    return 0


def _with_senses(pred, gold):
    senses = {f.predicate: f.sense for f in gold.frames or []}
    frames = [type(f)(f.predicate, f.arguments, senses.get(f.predicate)) for f in pred.frames or []]
    return pred.with_frames(frames)


# ------------------------------------------------------------------ evaluate / compare

def _scorer(args):
    if args.task == "word":
        return word_f1, {"include_sense": args.include_sense}
    return span_f1, {"count_predicates": args.setup == END_TO_END}


def cmd_evaluate(args) -> int:
    gold, pred = read_srl(args.gold, args.task), read_srl(args.pred, args.task)
    scorer, kw = _scorer(args)
    report = scorer(gold, pred, **kw)
    by_length = None
    if args.by_length is not None:
        edges = [int(x) for x in args.by_length.split(",")] if args.by_length else [10, 20, 30, 40]
        by_length = breakdown_by_length(gold, pred, edges, scorer=scorer, **kw)
    print(report.headline())
    if args.out:
        paths = write_report(args.out, report, by_role=args.by_role, by_length=by_length)
        print((Path(args.out) / "report.txt").read_text(encoding="utf-8"), end="")
        print("files: " + ", ".join(str(p) for p in paths.values()))
    return 0


def cmd_compare(args) -> int:
    gold = read_srl(args.gold, args.task)
    a, b = read_srl(args.pred_a, args.task), read_srl(args.pred_b, args.task)
    scorer, kw = _scorer(args)
    res = significance(a, b, gold, iterations=args.iterations, seed=args.seed, scorer=scorer, **kw)
    print(f"F1(A) {res.f1_a:.2f}  F1(B) {res.f1_b:.2f}  delta(B-A) {res.delta:+.2f}")
    print(f"p = {res.p_value:.6g}  ({res.exceed} of {res.iterations} shuffles reached |delta|; "
          f"iterations {res.iterations}, seed {res.seed})")
    if args.scatter:
        pts = sentence_scatter(a, b, gold, scorer=scorer, **kw)
        Path(args.scatter).write_text("".join(f"{x:.2f}\t{y:.2f}\n" for x, y in pts), encoding="utf-8")
    return 0


# ------------------------------------------------------------------ gen-synthetic

def cmd_gen_synthetic(args) -> int:
    corpus = gen_synthetic(args.preset, seed=args.seed, srl_train=args.srl_train, srl_dev=args.srl_dev,
                           srl_test=args.srl_test, dep_train=args.dep_train, dep_dev=args.dep_dev)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for split in ("srl_train", "srl_dev", "srl_test"):
        sents = getattr(corpus, split)
        if not sents:
            continue
        name = split[4:]
        write_span_props(out / f"{name}.words", out / f"{name}.props", sents)
        write_conll2009(out / f"{name}.conll09", [to_word_based(s) for s in sents])
        written += [f"{name}.words", f"{name}.props", f"{name}.conll09"]
    for split in ("dep_train", "dep_dev"):
        sents = getattr(corpus, split)
        if sents:
            write_dep_treebank(out / f"{split}.conllx", sents)
            written.append(f"{split}.conllx")
    print(f"wrote {', '.join(written)} to {out}")
    return 0


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="srlmtl", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    tr = sub.add_parser("train", help="train a model from a run config")
    tr.add_argument("--config", help="JSON file of RunConfig keys")
    tr.add_argument("--preset", choices=sorted(PRESETS))
    tr.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config key")
    for f in fields(RunConfig):
        tr.add_argument("--" + f.name.replace("_", "-"), dest=f"cfg_{f.name}", metavar=f.name.upper())
    tr.set_defaults(func=cmd_train)

    pr = sub.add_parser("predict", help="label sentences with a trained checkpoint")
    pr.add_argument("--checkpoint", required=True)
    pr.add_argument("--input", required=True, help="span task: path prefix of .words/.props; word task: CoNLL-2009")
    pr.add_argument("--output", required=True, help="same convention as --input")
    pr.add_argument("--setup", choices=[END_TO_END, GOLD_PREDICATES])
    pr.set_defaults(func=cmd_predict)

    for name, func, helptext in (("evaluate", cmd_evaluate, "score predictions against gold"),
                                 ("compare", cmd_compare, "significance of the difference between two systems")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--gold", required=True)
        p.add_argument("--task", choices=["span", "word"], default="span")
        p.add_argument("--setup", choices=[END_TO_END, GOLD_PREDICATES], default=GOLD_PREDICATES)
        p.add_argument("--include-sense", action="store_true")
        p.set_defaults(func=func)
        if name == "evaluate":
            p.add_argument("--pred", required=True)
            p.add_argument("--by-role", action="store_true")
            p.add_argument("--by-length", nargs="?", const="", metavar="EDGES",
                           help="comma-separated inclusive upper edges (default 10,20,30,40)")
            p.add_argument("--out", help="directory for report.txt and TSV tables")
        else:
            p.add_argument("--pred-a", required=True)
            p.add_argument("--pred-b", required=True)
            p.add_argument("--iterations", type=int, default=10000)
            p.add_argument("--seed", type=int, default=0)
            p.add_argument("--scatter", help="write per-sentence (F1_A, F1_B) pairs here")

    gs = sub.add_parser("gen-synthetic", help="write a synthetic SRL corpus and treebank")
    gs.add_argument("--out", required=True)
    gs.add_argument("--preset", choices=["simple", "hard"], default="simple")
    gs.add_argument("--seed", type=int, default=0)
    for split, default in (("srl-train", 50), ("srl-dev", 50), ("srl-test", 0), ("dep-train", 0), ("dep-dev", 0)):
        gs.add_argument("--" + split, type=int, default=default)
    gs.set_defaults(func=cmd_gen_synthetic)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - mapped to categorized exit codes
        code = _categorize(exc)
        if code == 1:
            raise
        print(f"error[{CATEGORY[code]}]: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
