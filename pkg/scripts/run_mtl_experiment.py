"""Syntax-free baseline vs IIR on scarce SRL data with a larger treebank, over several seeds."""

import argparse

import numpy as np

from srlmtl.experiments import directional_mtl


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--steps", type=int, default=1000)
    ap.add_argument("--srl-train", type=int, default=30)
    ap.add_argument("--dep-train", type=int, default=300)
    ap.add_argument("--test", type=int, default=200)
    args = ap.parse_args()

    results = [directional_mtl(seed, steps=args.steps, srl_train=args.srl_train, dep_train=args.dep_train,
                               test=args.test, log=lambda m: print(m, flush=True))
               for seed in range(args.seeds)]
    base = np.mean([r.baseline_f1 for r in results])
    iir = np.mean([r.iir_f1 for r in results])
    print(f"mean held-out F1: baseline {base:.2f}  IIR {iir:.2f}  (delta {iir - base:+.2f})")


if __name__ == "__main__":
    main()
