"""Generate the synthetic corpus, train a CRF, tag it back and score it.

    python3 scripts/smoke_pipeline.py --n-docs 370 --seed 42
"""
import argparse
import time

from seqtag.corpus import WNUT_SCHEME, generate_synthetic
from seqtag.crf import TrainConfig, fit_crf, tag_documents
from seqtag.evaluation import evaluate, render_report


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-docs", type=int, default=370)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--epochs", type=int, default=3)
    args = ap.parse_args()

    start = time.perf_counter()
    docs = generate_synthetic(args.seed, args.n_docs, WNUT_SCHEME)
    model, trace = fit_crf(docs, WNUT_SCHEME, config=TrainConfig(epochs=args.epochs, seed=args.seed))
    report = evaluate(docs, tag_documents(model, docs), WNUT_SCHEME)
    print(f"{len(docs)} docs, {len(model.index)} features, loss trace {[round(x, 4) for x in trace]}")
    print(render_report(report), end="")
    print(f"micro F1 {report.micro.f1:.4f} in {time.perf_counter() - start:.1f}s")


if __name__ == "__main__":
    main()
