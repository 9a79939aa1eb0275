"""Compare analytic CRF and BiLSTM-CRF gradients with central differences.

Prints the worst relative error per parameter block.
"""
import argparse

import numpy as np

from seqtag.bilstm import PARAM_NAMES, BiLstmConfig, init_bilstm, nll_and_gradient_bilstm
from seqtag.corpus import LabelScheme
from seqtag.crf import CrfModel, nll_and_gradient, transition_mask
from seqtag.features import FeatureIndex


def central(f, arr, idx, h):
    old = arr[idx]
    arr[idx] = old + h
    up = f()
    arr[idx] = old - h
    down = f()
    arr[idx] = old
    return (up - down) / (2 * h)


def worst_errors(params, grads, f, h):
    out = {}
    for name, arr in params.items():
        errs = [
            abs(grads[name][idx] - (fd := central(f, arr, idx, h))) / max(abs(grads[name][idx]), abs(fd), 1e-6)
            for idx in np.ndindex(arr.shape)
        ]
        out[name] = max(errs)
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--wd", type=float, default=0.005)
    ap.add_argument("--constrain", action="store_true")
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    scheme = LabelScheme(("A",))
    mask = transition_mask(scheme) if args.constrain else None
    gold = [1, 2, 0, 1]

    crf = CrfModel.zeros(scheme, FeatureIndex([f"f{i}" for i in range(4)]).freeze())
    for arr in crf.params().values():
        arr[...] = rng.normal(size=arr.shape)
    batch = [([np.array([0, 1]), np.array([2]), np.array([3]), np.array([0, 3])], gold)]
    _, g = nll_and_gradient(crf, batch, args.wd, mask)
    print("CRF")
    for name, err in worst_errors(crf.params(), g.params(), lambda: nll_and_gradient(crf, batch, args.wd, mask)[0], 1e-5).items():
        print(f"  {name:<12}{err:.2e}")

    lstm = init_bilstm(scheme, {"<UNK>": 0, "a": 1, "b": 2}, BiLstmConfig(emb_dim=3, hidden_dim=4, seed=args.seed))
    for k in PARAM_NAMES:
        lstm.params[k] = rng.uniform(-1, 1, lstm.params[k].shape)
    batch = [(np.array([1, 0, 2, 1]), gold)]
    _, g = nll_and_gradient_bilstm(lstm, batch, args.wd, mask)
    print("BiLSTM-CRF")
    for name, err in worst_errors(lstm.params, g, lambda: nll_and_gradient_bilstm(lstm, batch, args.wd, mask)[0], 1e-4).items():
        print(f"  {name:<12}{err:.2e}")


if __name__ == "__main__":
    main()
