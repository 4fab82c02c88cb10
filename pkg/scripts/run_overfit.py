"""Overfit checks: SRL on 50 synthetic sentences, then the parser on 10 trees."""

import argparse
import time

from srlmtl.experiments import overfit_parser, overfit_srl


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--srl-steps", type=int, default=2000)
    ap.add_argument("--parser-steps", type=int, default=500)
    args = ap.parse_args()

    t = time.perf_counter()
    f1, step, _ = overfit_srl(seed=args.seed, max_steps=args.srl_steps)
    print(f"srl    dev F1 {f1:6.2f} at step {step:5d}  ({time.perf_counter() - t:.0f}s)")
    t = time.perf_counter()
    uas, step = overfit_parser(seed=args.seed, max_steps=args.parser_steps)
    print(f"parser UAS    {uas:6.2f} at step {step:5d}  ({time.perf_counter() - t:.0f}s)")


if __name__ == "__main__":
    main()
