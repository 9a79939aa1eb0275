"""Learning-rate x weight-decay grid on a synthetic train/dev split.

    python3 scripts/sweep_synthetic.py --model crf --lrs 0.01,0.1,1 --wds 0.001,0.005,0.01
"""
import argparse

from seqtag.corpus import WNUT_SCHEME, generate_synthetic
from seqtag.experiment import DEFAULT_LR, ModelSpec, render_sweep, run_sweep


def floats(text):
    return [float(x) for x in text.split(",")]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--model", choices=sorted(DEFAULT_LR), default="crf")
    ap.add_argument("--lrs", type=floats, default=[0.01, 0.1, 1.0])
    ap.add_argument("--wds", type=floats, default=[0.001, 0.005, 0.01])
    ap.add_argument("--train-docs", type=int, default=60)
    ap.add_argument("--dev-docs", type=int, default=20)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    # different generator seeds give disjoint sentence draws for train and dev
    train = generate_synthetic(1, args.train_docs, WNUT_SCHEME)
    dev = generate_synthetic(2, args.dev_docs, WNUT_SCHEME)
    grid = run_sweep(ModelSpec(kind=args.model), args.lrs, args.wds, train, dev, WNUT_SCHEME, jobs=args.jobs)
    print(render_sweep(grid), end="")


if __name__ == "__main__":
    main()
