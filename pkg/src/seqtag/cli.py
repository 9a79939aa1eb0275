"""``seqtag`` command line.

Exit codes: 0 success, 1 input/config error, 2 evaluation mismatch,
3 validation failures found.

Settings resolve as defaults < ``--config`` file (``key=value`` lines) < flags.
"""
from __future__ import annotations

import argparse
import hashlib
import logging
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import corpus
from .bilstm import BiLstmConfig, save_bilstm
from .corpus import WNUT_SCHEME, conll_paths, read_conll_file, serialize_conll, validate_bio
from .crf import CrfModel, TrainConfig, save_model
from .errors import SeqtagError, TokenizationMismatch
from .evaluation import evaluate, render_report, render_tsv
from .experiment import DEFAULT_LR, ModelSpec, predict, render_sweep, run_sweep, train_model
from .features import FeatureConfig, load_gazetteer
from .modelio import load_model
from .utils import atomic_write, header_line

log = logging.getLogger("seqtag")

EXIT_OK, EXIT_INPUT, EXIT_MISMATCH, EXIT_INVALID = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    paths: dict = field(default_factory=dict)
    spec: ModelSpec = ModelSpec()
    gazetteer: str | None = None

    def as_dict(self) -> dict:
        return {"command": self.command, "paths": self.paths, "spec": asdict(self.spec), "gazetteer": self.gazetteer}

    def header(self) -> str:
        return header_line(dict(self.as_dict(), seed=self.spec.train.seed))


# ---------------------------------------------------------------- argument parsing


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_model_options(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model and training")
    g.add_argument("--model", choices=sorted(DEFAULT_LR), default="crf")
    g.add_argument("--lr", type=float, default=None, help="learning rate (default: 0.1 crf, 0.05 bilstm)")
    g.add_argument("--weight-decay", type=float, default=0.005)
    g.add_argument("--epochs", type=int, default=3)
    g.add_argument("--seed", type=int, default=42)
    g.add_argument("--batch-size", type=int, default=1)
    g.add_argument("--no-shuffle", action="store_true")
    g.add_argument("--lowercase", action="store_true")
    g.add_argument("--no-constrain", action="store_true")
    g.add_argument("--window", type=int, default=2)
    g.add_argument("--affix-len", type=int, default=3)
    g.add_argument("--no-shape", action="store_true")
    g.add_argument("--no-gazetteer", action="store_true")
    g.add_argument("--gazetteer", default=None, help="extra type<TAB>phrase list merged into the training gazetteer")
    g.add_argument("--emb-dim", type=int, default=16)
    g.add_argument("--hidden-dim", type=int, default=16)
    g.add_argument("--min-freq", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seqtag", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="key=value settings file")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a CRF or BiLSTM-CRF model")
    p.add_argument("--train", required=True, help=".conll file or directory")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--trace", help="loss trace file (default: <out>.trace.tsv)")
    _add_model_options(p)

    p = sub.add_parser("tag", help="tag CoNLL input with a trained model")
    p.add_argument("model_file")
    p.add_argument("input", help=".conll file or directory (tags optional)")
    p.add_argument("output", help="output file, or directory when input is a directory")
    p.add_argument("--no-constrain", action="store_true")
    p.add_argument("--lowercase", action="store_true")

    p = sub.add_parser("eval", help="entity-level P/R/F1 of predictions against gold")
    p.add_argument("gold")
    p.add_argument("pred")
    p.add_argument("--out", help="also write the table here")
    p.add_argument("--tsv", help="write type/tp/pred/gold/P/R/F1 lines here")
    p.add_argument("--aliases", action="store_true", help="use short display names for Measure-Type/Generic-Measure")

    p = sub.add_parser("validate", help="list BIO violations")
    p.add_argument("path")

    p = sub.add_parser("convert", help="BRAT standoff directory to CoNLL files")
    p.add_argument("brat_dir")
    p.add_argument("out_dir")

    p = sub.add_parser("sweep", help="learning-rate x weight-decay grid on train/dev")
    p.add_argument("--train", required=True)
    p.add_argument("--dev", required=True)
    p.add_argument("--lrs", type=_floats, default=[0.01, 0.1, 1.0])
    p.add_argument("--wds", type=_floats, default=[0.001, 0.005, 0.01])
    p.add_argument("--out", required=True, help="sweep table file")
    p.add_argument("--jobs", type=int, default=1)
    _add_model_options(p)

    p = sub.add_parser("gen-synthetic", help="write the deterministic synthetic corpus")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n-docs", type=int, default=370)
    p.add_argument("--seed", type=int, default=42)
    return parser


def read_config_file(path) -> dict[str, str]:
    values = {}
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key=value")
        key, value = (x.strip() for x in line.split("=", 1))
        values[key.lstrip("-").replace("-", "_")] = value
    return values


def _coerce(action: argparse.Action, raw: str):
    if isinstance(action, argparse._StoreTrueAction):
        return raw.lower() in ("1", "true", "yes", "on")
    return action.type(raw) if action.type is not None else raw


def parse_args(argv) -> argparse.Namespace:
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config is not None:
        file_values = read_config_file(known.config)
        used = set()
        # File values become subcommand defaults, so explicit flags still win.
        for subparser in parser._subparsers._group_actions[0].choices.values():
            actions = {a.dest: a for a in subparser._actions}
            defaults = {k: _coerce(actions[k], v) for k, v in file_values.items() if k in actions}
            for k in defaults:
                actions[k].required = False
            subparser.set_defaults(**defaults)
            used |= defaults.keys()
        unknown = sorted(file_values.keys() - used)
        if unknown:
            raise UsageError(f"{known.config}: unknown setting(s) {', '.join(unknown)}")
    return parser.parse_args(argv)


def spec_from_args(args) -> ModelSpec:
    lr = args.lr if args.lr is not None else DEFAULT_LR[args.model]
    if not lr > 0:
        raise UsageError("--lr must be > 0")
    if args.weight_decay < 0:
        raise UsageError("--weight-decay must be >= 0")
    if args.epochs < 1:
        raise UsageError("--epochs must be >= 1")
    try:
        return ModelSpec(
            kind=args.model,
            train=TrainConfig(lr, args.weight_decay, args.epochs, args.seed, not args.no_shuffle, args.batch_size),
            features=FeatureConfig(args.window, args.affix_len, not args.no_shape, not args.no_gazetteer),
            bilstm=BiLstmConfig(args.min_freq, args.emb_dim, args.hidden_dim, args.seed),
            lowercase=args.lowercase,
            constrain=not args.no_constrain,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _require(path, what="path") -> Path:
    path = Path(path)
    if not path.exists():
        raise UsageError(f"{what} not found: {path}")
    return path


def _gazetteer(args):
    if getattr(args, "gazetteer", None):
        return load_gazetteer(_require(args.gazetteer, "gazetteer"))
    return None


def _file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:12]


# ---------------------------------------------------------------- commands


def cmd_train(args) -> int:
    spec = spec_from_args(args)
    train_path = _require(args.train, "training corpus")
    rc = RunConfig("train", {"train": str(train_path)}, spec, args.gazetteer)
    gaz = _gazetteer(args)
    docs = corpus.read_corpus(train_path, WNUT_SCHEME)
    model, trace = train_model(spec, docs, WNUT_SCHEME, gaz)
    if isinstance(model, CrfModel):
        save_model(model, args.out)
    else:
        save_bilstm(model, args.out)
    trace_path = args.trace or f"{args.out}.trace.tsv"
    lines = [rc.header(), "epoch\tloss"] + [f"{i}\t{loss!r}" for i, loss in enumerate(trace, 1)]
    atomic_write(trace_path, "\n".join(lines) + "\n")
    print(f"trained {spec.kind} on {len(docs)} documents; final loss {trace[-1]:.6f}; model -> {args.out}")
    return EXIT_OK


def cmd_tag(args) -> int:
    model_path = _require(args.model_file, "model file")
    in_path = _require(args.input, "input")
    model = load_model(model_path)
    rc = RunConfig("tag", {"model": _file_digest(model_path)})
    rc.spec = ModelSpec(lowercase=args.lowercase, constrain=not args.no_constrain)
    header = rc.header()
    violations = 0
    paths = conll_paths(in_path)
    if not paths:
        raise UsageError(f"no .conll files under {in_path}")
    for path in paths:
        doc = read_conll_file(path, model.scheme, tags_optional=True)
        tagged = predict(model, [doc], args.lowercase, not args.no_constrain)[0]
        violations += sum(len(validate_bio(s.tags("pred"))) for s in tagged.sentences)
        out = Path(args.output) / path.name if in_path.is_dir() else Path(args.output)
        atomic_write(out, serialize_conll([tagged], "pred", header))
    if violations:
        print(f"warning: {violations} BIO violations in unconstrained output", file=sys.stderr)
    return EXIT_OK


def cmd_eval(args) -> int:
    gold = corpus.read_corpus(_require(args.gold, "gold"))
    pred = corpus.read_corpus(_require(args.pred, "predictions"))
    try:
        report = evaluate(gold, pred, WNUT_SCHEME, corpus.DISPLAY_ALIASES if args.aliases else None)
    except TokenizationMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    table = render_report(report)
    rc = RunConfig("eval", {"gold": _file_digest_tree(args.gold), "pred": _file_digest_tree(args.pred)})
    if args.out:
        atomic_write(args.out, rc.header() + "\n" + table)
    if args.tsv:
        atomic_write(args.tsv, rc.header() + "\n" + render_tsv(report))
    if report.repaired:
        print(f"note: {report.repaired} predicted tags repaired before scoring", file=sys.stderr)
    sys.stdout.write(table)
    print(f"F1={report.micro.f1:.4f}")
    return EXIT_OK


def _file_digest_tree(path) -> str:
    h = hashlib.sha256()
    for p in conll_paths(path):
        h.update(p.name.encode() + b"\0" + p.read_bytes())
    return h.hexdigest()[:12]


def cmd_validate(args) -> int:
    path = _require(args.path)
    paths = conll_paths(path)
    if not paths:
        raise UsageError(f"no .conll files under {path}")
    count = 0
    for p in paths:
        doc = read_conll_file(p)
        for s, sent in enumerate(doc.sentences):
            for v in validate_bio(sent.tags("gold")):
                print(f"{p.name}:{s}:{v.position} {v.prev_tag or '<BOS>'} {v.tag}")
                count += 1
    print(f"{count} violation(s) in {len(paths)} file(s)", file=sys.stderr)
    return EXIT_INVALID if count else EXIT_OK


def cmd_convert(args) -> int:
    brat_dir = _require(args.brat_dir, "BRAT directory")
    txts = {p.stem: p for p in brat_dir.glob("*.txt")}
    anns = {p.stem: p for p in brat_dir.glob("*.ann")}
    unpaired = sorted(txts.keys() ^ anns.keys())
    if unpaired:
        raise UsageError(f"unpaired BRAT files: {', '.join(unpaired)}")
    if not txts:
        raise UsageError(f"no .txt/.ann pairs in {brat_dir}")
    header = RunConfig("convert", {"brat_dir": brat_dir.name}).header()
    n_ent = n_drop = 0
    for stem in sorted(txts):
        doc, issues = corpus.align_brat(
            txts[stem].read_text(encoding="utf-8"), anns[stem].read_text(encoding="utf-8"), doc_id=stem
        )
        for issue in issues:
            print(f"{stem}.ann: {issue.ann_id}: {issue.message}", file=sys.stderr)
        n_drop += len(issues)
        n_ent += len(corpus.document_entities(doc))
        atomic_write(Path(args.out_dir) / f"{stem}.conll", serialize_conll([doc], "gold", header))
    print(f"converted {len(txts)} documents: {n_ent} entities, {n_drop} annotations dropped")
    return EXIT_OK


def cmd_sweep(args) -> int:
    spec = spec_from_args(args)
    if not args.lrs or not args.wds:
        raise UsageError("--lrs and --wds must be non-empty")
    if any(lr <= 0 for lr in args.lrs) or any(wd < 0 for wd in args.wds):
        raise UsageError("learning rates must be > 0 and weight decays >= 0")
    train_path, dev_path = _require(args.train, "train"), _require(args.dev, "dev")
    gaz = _gazetteer(args)
    train_docs = corpus.read_corpus(train_path)
    dev_docs = corpus.read_corpus(dev_path)
    rc = RunConfig("sweep", {"train": _file_digest_tree(train_path), "dev": _file_digest_tree(dev_path),
                             "lrs": args.lrs, "wds": args.wds}, spec, args.gazetteer)
    grid = run_sweep(spec, args.lrs, args.wds, train_docs, dev_docs, WNUT_SCHEME, gaz, args.jobs)
    table = render_sweep(grid)
    atomic_write(args.out, rc.header() + "\n" + table)
    sys.stdout.write(table)
    if grid.failures:
        print(f"warning: {grid.failures} sweep cell(s) failed", file=sys.stderr)
    return EXIT_OK


def cmd_gen_synthetic(args) -> int:
    if args.n_docs < 1:
        raise UsageError("--n-docs must be >= 1")
    docs = corpus.generate_synthetic(args.seed, args.n_docs, WNUT_SCHEME)
    rc = RunConfig("gen-synthetic", {"n_docs": args.n_docs})
    rc.spec = ModelSpec(train=TrainConfig(seed=args.seed))
    corpus.write_corpus(docs, args.out, "gold", rc.header())
    print(f"wrote {len(docs)} documents to {args.out}")
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "tag": cmd_tag,
    "eval": cmd_eval,
    "validate": cmd_validate,
    "convert": cmd_convert,
    "sweep": cmd_sweep,
    "gen-synthetic": cmd_gen_synthetic,
}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except (UsageError, ValueError, OSError, argparse.ArgumentTypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SystemExit as exc:  # argparse usage errors
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, SeqtagError, OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
