"""Command-line interface.

Each subcommand reads static input files, runs one analysis and writes a
single report. Output is buffered and written only when the command
succeeds. Exit statuses: 0 success, 1 invalid input, 2 insufficient
data, 64 usage error, 74 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import agreement, diagnostics, ingest, metrics, scoring, trainer
from .core import ASPECTS, BINNING_MODES, ROUNDING_MODES, SETTINGS, EvalConfig, PairSet
from .errors import EmpathEvalError, InsufficientDataError, SchemaError
from .losses import LOSS_KINDS, LossConfig, PairBatch, get_loss, grad_check
from .reports import FORMATS, AgreementTable, LossEvalReport, RunManifest, render_report

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_INSUFFICIENT = 2
EXIT_USAGE = 64
EXIT_IO = 74

SEED_ENV = "EMPATH_EVAL_SEED"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that reports usage problems with exit status 64."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class _Inputs:
    """Reads input files once, keeping their bytes for the manifest."""

    def __init__(self):
        self.digests: dict[str, bytes] = {}

    def read(self, role: str, path: str) -> bytes:
        data = Path(path).read_bytes()
        self.digests[role] = data
        return data


# ---------------------------------------------------------------------------
# argument parsing


def _globals(parser: argparse.ArgumentParser, top: bool) -> None:
    # Subparsers suppress defaults so flags given before the subcommand survive.
    dflt = (lambda v: v) if top else (lambda v: argparse.SUPPRESS)
    parser.add_argument("--format", choices=FORMATS, default=dflt("md"),
                        help="report format (default md)")
    parser.add_argument("--out", default=dflt(None), help="write the report here instead of stdout")
    parser.add_argument("--quiet", action="store_true", default=dflt(False),
                        help="do not print warnings")


def _aspect(value: str) -> str:
    if value not in ASPECTS:
        raise argparse.ArgumentTypeError(f"unknown aspect {value!r} (choose from {', '.join(ASPECTS)})")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="empath-eval", description="Evaluate and diagnose pairwise similarity scores.")
    _globals(p, top=True)
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    def cmd(name: str, help: str) -> argparse.ArgumentParser:
        sp = sub.add_parser(name, help=help, description=help)
        _globals(sp, top=False)
        return sp

    sp = cmd("evaluate", "correlation, MSE and classification metrics against gold scores")
    sp.add_argument("--pairs", required=True)
    sp.add_argument("--preds", required=True)
    sp.add_argument("--aspect", required=True, type=_aspect)
    sp.add_argument("--threshold", type=float, default=2.5)
    sp.add_argument("--swap", choices=scoring.SWAP_MODES)
    sp.add_argument("--binning", choices=BINNING_MODES, default="threshold")
    sp.add_argument("--rounding", choices=ROUNDING_MODES, default="half-down")

    sp = cmd("score", "cosine scores from story embeddings, as a predictions file")
    sp.add_argument("--pairs", required=True)
    sp.add_argument("--embeddings", required=True)
    sp.add_argument("--head", help="trained head (train-head JSON output)")
    sp.add_argument("--scale", type=float, default=4.0)
    sp.add_argument("--clamp", action="store_true", help="clamp scaled scores into [1, 4]")
    sp.add_argument("--aspect", default="all", choices=ASPECTS + ("all",))

    sp = cmd("train-head", "train a linear projection head over frozen embeddings")
    sp.add_argument("--pairs", required=True)
    sp.add_argument("--embeddings", required=True)
    sp.add_argument("--train-aspect", required=True, type=_aspect)
    sp.add_argument("--eval-aspect", default="empathy", type=_aspect)
    sp.add_argument("--loss", required=True, choices=LOSS_KINDS)
    sp.add_argument("--lr", type=float, default=1e-2)
    sp.add_argument("--epochs", type=int, default=20)
    sp.add_argument("--batch", type=int, default=32)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out-dim", type=int)
    sp.add_argument("--early-stop", type=int)
    sp.add_argument("--margin", type=float, default=0.5)
    sp.add_argument("--lambda", dest="scale", type=float, default=20.0)

    sp = cmd("loss-eval", "loss value and gradients for a batch of embedding pairs")
    sp.add_argument("--batch", required=True, help='JSON {"u": [[...]], "v": [[...]], "labels": [...]}')
    sp.add_argument("--loss", required=True, choices=LOSS_KINDS)
    sp.add_argument("--margin", type=float, default=0.5)
    sp.add_argument("--lambda", dest="scale", type=float, default=20.0)
    sp.add_argument("--threshold", type=float, default=2.5)
    sp.add_argument("--grad-check", action="store_true")

    sp = cmd("agreement", "inter-annotator agreement per group, aspect and setting")
    sp.add_argument("--annotations", required=True)
    sp.add_argument("--groups", help='JSON {"group": ["annotator", ...]}')
    sp.add_argument("--aspect", default="all", choices=ASPECTS + ("all",))
    sp.add_argument("--setting", default="all", choices=SETTINGS + ("all",))
    sp.add_argument("--reference", help="reference scores: JSON {item: score} or a pairs file")
    sp.add_argument("--level", choices=agreement.LEVELS)
    sp.add_argument("--discretizer", choices=agreement.DISCRETIZERS)

    sp = cmd("aspect-corr", "correlation between the gold aspect columns")
    sp.add_argument("--pairs", required=True)

    sp = cmd("diagnose", "severe errors, probability profile or confusion matrix")
    sp.add_argument("analysis", choices=("errors", "bottleneck", "confusion"))
    sp.add_argument("--pairs", required=True)
    sp.add_argument("--preds", help="required except for bottleneck, which then reports P(Y) only")
    sp.add_argument("--aspect", required=True, type=_aspect)
    sp.add_argument("--delta", type=float, default=1.0)
    sp.add_argument("--rounding", choices=ROUNDING_MODES, default="half-down")
    sp.add_argument("--split", help="pair split to analyse (default: all pairs)")
    sp.add_argument("--prior-split", help="split for P(Y) (default: same as --split)")
    sp.add_argument("--mode", choices=("auto",) + diagnostics.CONFUSION_MODES, default="auto")
    sp.add_argument("--swap", choices=scoring.SWAP_MODES)
    return p


# ---------------------------------------------------------------------------
# commands


def _load_pairs(inputs: _Inputs, path: str) -> PairSet:
    data = inputs.read("pairs", path)
    pairs = ingest.parse_pairs(data, ingest.detect_format(path))
    pairs.raise_for_errors()
    return pairs


def _load_preds(inputs: _Inputs, path: str, swap: Optional[str]):
    data = inputs.read("preds", path)
    preds = ingest.parse_predictions(data, ingest.detect_format(path))
    preds.raise_for_errors()
    if swap is not None:
        preds = scoring.swap_aggregate(preds, swap)
    return preds


def _load_embeddings(inputs: _Inputs, path: str):
    data = inputs.read("embeddings", path)
    fmt = "packed-binary" if data.startswith(ingest.EMBEDDING_MAGIC) else "jsonl"
    emb = ingest.parse_embeddings(data, fmt)
    emb.raise_for_errors()
    return emb


def _load_json(inputs: _Inputs, role: str, path: str) -> Any:
    data = inputs.read(role, path)
    try:
        return json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from None


def _resolve_seed(seed: Optional[int]) -> int:
    if seed is not None:
        return seed
    env = os.environ.get(SEED_ENV)
    if env is None:
        raise UsageError(f"--seed is required (or set {SEED_ENV})")
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None


def run_evaluate(args, inputs: _Inputs):
    config = EvalConfig(bin_threshold=args.threshold, binning=args.binning, rounding=args.rounding)
    pairs = _load_pairs(inputs, args.pairs)
    preds = _load_preds(inputs, args.preds, args.swap)
    report = metrics.evaluate(preds, pairs, args.aspect, config)
    cfg = {"aspect": args.aspect, "swap": args.swap, "eval": config.to_dict()}
    return report, cfg, None, list(preds.warnings) + list(report.warnings)


def _load_head(inputs: _Inputs, path: str) -> trainer.ProjectionHead:
    data = inputs.read("head", path)
    try:
        doc = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError):
        raise SchemaError(f"{path}: not a JSON head file; write it with "
                          "'train-head --format json'") from None
    if isinstance(doc, dict) and isinstance(doc.get("report"), dict):
        doc = doc["report"]
    if not isinstance(doc, dict):
        raise SchemaError(f"{path}: not a serialized projection head")
    return trainer.head_from_dict(doc)


def run_score(args, inputs: _Inputs):
    config = EvalConfig(scale_factor=args.scale, clamp_scaled=args.clamp)
    pairs = _load_pairs(inputs, args.pairs)
    emb = _load_embeddings(inputs, args.embeddings)
    head = None
    if args.head:
        head = _load_head(inputs, args.head)
    aspects = ASPECTS if args.aspect == "all" else (args.aspect,)
    preds = scoring.cosine_score_pairs(emb, pairs, head, config, aspects)
    cfg = {"aspects": list(aspects), "eval": config.to_dict(), "head": bool(head)}
    return preds, cfg, None, []


def run_train_head(args, inputs: _Inputs):
    seed = _resolve_seed(args.seed)
    config = trainer.TrainConfig(
        loss_kind=args.loss, learning_rate=args.lr, epochs=args.epochs, batch_size=args.batch,
        seed=seed, out_dim=args.out_dim, early_stop=args.early_stop,
        loss=LossConfig(margin=args.margin, scale=args.scale),
    )
    pairs = _load_pairs(inputs, args.pairs)
    emb = _load_embeddings(inputs, args.embeddings)
    history = trainer.train_projection(emb, pairs, args.train_aspect, args.eval_aspect, config)
    return history, {"train": config.to_dict()}, seed, []


def _batch_from_json(doc: Any) -> PairBatch:
    if not isinstance(doc, dict) or not {"u", "v", "labels"} <= set(doc):
        raise SchemaError('batch must be a JSON object with "u", "v" and "labels"')
    try:
        return PairBatch(np.asarray(doc["u"], dtype=np.float64), np.asarray(doc["v"], dtype=np.float64),
                         np.asarray(doc["labels"], dtype=np.float64), doc.get("binary_labels"))
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"batch arrays are malformed: {exc}") from None


def run_loss_eval(args, inputs: _Inputs):
    config = LossConfig(margin=args.margin, scale=args.scale, threshold=args.threshold)
    batch = _batch_from_json(_load_json(inputs, "batch", args.batch))
    fn = get_loss(args.loss)
    result = fn(batch, config)
    err = grad_check(fn, batch, config) if args.grad_check else None
    cfg = {"loss": args.loss, "margin": config.margin, "lambda": config.scale,
           "threshold": config.threshold}
    return LossEvalReport.from_result(args.loss, result, cfg, err), cfg, None, []


def _reference_scores(inputs: _Inputs, path: str, aspect: str) -> dict[str, float]:
    data = inputs.read("reference", path)
    try:
        doc = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError):
        doc = None
    if isinstance(doc, dict) and "pair_id" not in doc:
        try:
            return {str(k): float(v) for k, v in doc.items()}
        except (TypeError, ValueError):
            raise SchemaError(f"{path}: reference mapping values must be numbers") from None
    pairs = ingest.parse_pairs(data, ingest.detect_format(path))
    pairs.raise_for_errors()
    return {p.pair_id: p.gold[aspect] for p in pairs if aspect in p.gold}


def run_agreement(args, inputs: _Inputs):
    data = inputs.read("annotations", args.annotations)
    ann = ingest.parse_annotations(data, "jsonl" if args.annotations.endswith(".jsonl") else "csv")
    ann.raise_for_errors()
    groups = None
    if args.groups:
        groups = _load_json(inputs, "groups", args.groups)
        if not isinstance(groups, dict) or not all(isinstance(v, list) for v in groups.values()):
            raise SchemaError("groups must be a JSON object mapping names to annotator lists")
    aspects = None if args.aspect == "all" else [args.aspect]
    settings = None if args.setting == "all" else [args.setting]
    rows = agreement.group_report(ann, groups, aspects, settings, args.level, args.discretizer)
    if not rows:
        raise InsufficientDataError("no ratings for the requested aspect and setting")
    ref_rows = []
    if args.reference:
        for aspect in sorted(aspects or ann.aspects):
            ref = _reference_scores(inputs, args.reference, aspect)
            for setting in sorted(settings or ann.settings):
                if setting == "combined" or not ann.has(aspect, setting):
                    continue
                ref_rows.append(agreement.consensus_vs_reference(
                    ann, aspect, setting, ref, args.discretizer if setting != "discrete" else None,
                    args.level or "interval"))
    cfg = {"aspect": args.aspect, "setting": args.setting, "groups": groups,
           "level": args.level, "discretizer": args.discretizer}
    return AgreementTable(tuple(rows), tuple(ref_rows)), cfg, None, []


def run_aspect_corr(args, inputs: _Inputs):
    pairs = _load_pairs(inputs, args.pairs)
    return metrics.aspect_correlation(pairs), {}, None, []


def run_diagnose(args, inputs: _Inputs):
    config = EvalConfig(severe_error_delta=args.delta, rounding=args.rounding)
    all_pairs = _load_pairs(inputs, args.pairs)
    pairs = all_pairs.select(args.split) if args.split else all_pairs
    cfg = {"analysis": args.analysis, "aspect": args.aspect, "delta": args.delta,
           "rounding": args.rounding, "split": args.split, "prior_split": args.prior_split,
           "swap": args.swap}
    if args.preds is None:
        if args.analysis != "bottleneck":
            raise UsageError(f"diagnose {args.analysis} requires --preds")
        prior = diagnostics.empirical_distribution(all_pairs, args.aspect,
                                                   args.prior_split or args.split, args.rounding)
        profile = diagnostics.ProbabilityProfile(
            tuple(diagnostics.GroupProfile(c, 0, None) for c in range(1, 5)), prior,
            args.aspect, args.rounding)
        return profile, cfg, None, []
    preds = _load_preds(inputs, args.preds, args.swap)
    if args.analysis == "errors":
        report = diagnostics.severe_error_table(preds, pairs, args.aspect, config)
    elif args.analysis == "bottleneck":
        prior = diagnostics.empirical_distribution(all_pairs, args.aspect,
                                                   args.prior_split or args.split, args.rounding)
        report = diagnostics.probability_profile(preds, pairs, args.aspect, args.rounding,
                                                 empirical=prior)
    else:
        mode = args.mode
        if mode == "auto":
            recs = preds.for_aspect(args.aspect)
            mode = "argmax-probs" if recs and all(r.probs is not None for r in recs) else "rounded-score"
        cfg["mode"] = mode
        report = diagnostics.confusion_matrix(preds, pairs, args.aspect, args.rounding, mode)
    return report, cfg, None, list(preds.warnings) + list(report.warnings)


COMMANDS = {
    "evaluate": run_evaluate,
    "score": run_score,
    "train-head": run_train_head,
    "loss-eval": run_loss_eval,
    "agreement": run_agreement,
    "aspect-corr": run_aspect_corr,
    "diagnose": run_diagnose,
}


def _command_name(args) -> str:
    return f"diagnose {args.analysis}" if args.command == "diagnose" else args.command


def run(argv: Optional[Sequence[str]] = None, stdout=None, stderr=None) -> int:
    """Execute one command; returns the exit status."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    inputs = _Inputs()
    try:
        result, cfg, seed, warnings = COMMANDS[args.command](args, inputs)
        manifest = RunManifest.build(_command_name(args), cfg, inputs.digests, seed)
        if args.command == "score":
            payload = ingest.dump_predictions(result).encode("utf-8")
        else:
            payload = render_report(result, args.format, manifest)
    except UsageError as exc:
        print(f"empath-eval: error: {exc}", file=stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"empath-eval: I/O error: {exc}", file=stderr)
        return EXIT_IO
    except InsufficientDataError as exc:
        print(f"empath-eval: insufficient data: {exc}", file=stderr)
        return EXIT_INSUFFICIENT
    except EmpathEvalError as exc:
        print(f"empath-eval: invalid input: {exc}", file=stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"empath-eval: invalid input: {exc}", file=stderr)
        return EXIT_INVALID

    if not args.quiet:
        for w in warnings:
            print(f"warning: {w}", file=stderr)
    try:
        if args.out:
            Path(args.out).write_bytes(payload)
            if args.command == "score":
                Path(args.out + ".manifest.json").write_text(
                    json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n")
        else:
            buf = getattr(stdout, "buffer", None)
            if buf is not None:
                buf.write(payload)
                buf.flush()
            else:
                stdout.write(payload.decode("utf-8"))
    except OSError as exc:
        print(f"empath-eval: I/O error: {exc}", file=stderr)
        return EXIT_IO
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
