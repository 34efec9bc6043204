"""Command line: generation, training, evaluation, experiments, annotation,
geometry export, and the inference service.

Exit codes: 0 success, 1 validation/usage error, 2 internal error. Machine
readable results go to files; short human summaries go to standard output.
Every run prints a fingerprint, and file-producing runs write a .meta.json
sidecar with the full configuration for exact re-runs.
"""

import argparse
import json
import random
import sys
from dataclasses import asdict, replace
from pathlib import Path

from .annotate import annotate_transcript, format_annotations
from .checkpoint import CheckpointError
from .data import (
    FileError,
    HeaderMismatch,
    TooFewRecords,
    UnmappedLabel,
    load_tsv,
    step_from_record,
    write_tsv,
)
from .experiments import (
    LeakageDetected,
    WrongModelKind,
    desk_config,
    export_operation_geometry,
    run_cross_distribution,
    run_pretrain_finetune,
    run_xval,
    write_geometry,
    write_report,
)
from .expr import ExprError
from .generate import GenParams, MathOp, gen_dataset
from .models import (
    Hyper,
    InsufficientDiversity,
    MethodKind,
    UnknownLabel,
    _METHOD_ENCODER,
    corpus_fingerprint,
    load_model,
    save_model,
    train,
)
from .server import serve

_VALIDATION_ERRORS = (
    ValueError,
    FileError,
    HeaderMismatch,
    TooFewRecords,
    UnmappedLabel,
    UnknownLabel,
    InsufficientDiversity,
    LeakageDetected,
    WrongModelKind,
    CheckpointError,
    ExprError,
    OSError,
)


class UsageError(Exception):
    """Bad flags or subcommand; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------- config


def _load_config(path):
    if path is None:
        return {}
    try:
        conf = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"--config {path}: not valid JSON: {exc}")
    if not isinstance(conf, dict):
        raise UsageError(f"--config {path}: expected a JSON object")
    return conf


def _encoder_for(method, conf):
    cfg = desk_config(_METHOD_ENCODER[method])
    overrides = conf.get("encoder", {})
    known = {
        "symbol_embed_dim", "hidden_dim", "adapter_hidden", "adapter_out_dim",
        "max_depth", "cnn_widths", "cnn_filters",
    }
    bad = set(overrides) - known
    if bad:
        raise UsageError(f"unknown encoder config keys: {sorted(bad)}")
    if "cnn_widths" in overrides:
        overrides = dict(overrides, cnn_widths=tuple(overrides["cnn_widths"]))
    return replace(cfg, **overrides)


def _hyper_from(conf, epochs=None):
    overrides = dict(conf.get("hyper", {}))
    known = set(asdict(Hyper()))
    bad = set(overrides) - known
    if bad:
        raise UsageError(f"unknown hyper config keys: {sorted(bad)}")
    if epochs is not None:
        overrides["epochs"] = epochs
    return Hyper(**overrides)


def _write_meta(out_path, meta):
    path = Path(str(out_path) + ".meta.json")
    path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def _load_steps(path):
    records, rejections = load_tsv(path)
    if rejections:
        print(f"warning: rejected {len(rejections)} row(s) of {path}:",
              file=sys.stderr)
        for r in rejections[:5]:
            print(f"  line {r.line}: {r.reason}", file=sys.stderr)
    if not records:
        raise UsageError(f"{path} holds no valid records")
    return [step_from_record(r) for r in records]


def _labels_for(steps, task):
    if task == "operation":
        labels = [s.op.name for s in steps]
        observed = set(labels)
        classes = [op.name for op in MathOp if op.name in observed]
    else:
        labels = [s.feedback for s in steps]
        classes = sorted(set(labels))
    return labels, classes


def _parse_named_paths(pairs, flag):
    out = {}
    for item in pairs or []:
        if "=" not in item:
            raise UsageError(f"{flag} expects NAME=PATH, got {item!r}")
        name, path = item.split("=", 1)
        out[name] = path
    return out


# ---------------------------------------------------------------- commands


def cmd_gen(args):
    params = GenParams(args.entropy, args.degree, args.flip)
    steps = gen_dataset(args.n_per_op, params, args.bug_fraction,
                        random.Random(args.seed), id_prefix=args.id_prefix)
    write_tsv(args.out, steps)
    fp = corpus_fingerprint(steps)
    outcomes = {}
    for s in steps:
        outcomes[s.outcome.name] = outcomes.get(s.outcome.name, 0) + 1
    _write_meta(args.out, {
        "command": "gen", "n_per_op": args.n_per_op, "entropy": args.entropy,
        "degree": args.degree, "flip": args.flip,
        "bug_fraction": args.bug_fraction, "id_prefix": args.id_prefix,
        "seed": args.seed, "fingerprint": fp,
    })
    counts = ", ".join(f"{k}={v}" for k, v in sorted(outcomes.items()))
    print(f"wrote {len(steps)} steps to {args.out} ({counts}) fingerprint {fp}")
    return 0


def cmd_train(args):
    conf = _load_config(args.config)
    steps = _load_steps(args.data)
    if args.task == "feedback":
        steps = [s for s in steps if s.feedback]
        if not steps:
            raise UsageError(f"{args.data} holds no feedback-labeled steps")
    labels, classes = _labels_for(steps, args.task)
    method = MethodKind(args.method)
    model = train(method, steps, labels, classes,
                  cfg=_encoder_for(method, conf),
                  hyper=_hyper_from(conf, args.epochs), seed=args.seed)
    save_model(args.out, model)
    _write_meta(args.out, {
        "command": "train", "data": str(args.data), "method": method.value,
        "task": args.task, "seed": args.seed, "encoder": model.cfg.kind.value,
        "hyper": asdict(model.hyper), "fingerprint": model.fingerprint,
    })
    final = f"{model.loss_curve[-1]:.4f}" if model.loss_curve else "n/a"
    print(f"trained {method.value} on {len(steps)} steps "
          f"(final loss {final}) -> {args.out} fingerprint {model.fingerprint}")
    return 0


def cmd_eval(args):
    model = load_model(args.model)
    steps = _load_steps(args.data)
    if args.task == "feedback":
        steps = [s for s in steps if s.feedback]
    labels, _ = _labels_for(steps, args.task)
    idx = {c: i for i, c in enumerate(model.classes)}
    for lab in labels:
        if lab not in idx:
            raise UnknownLabel(f"label {lab!r} not in model classes")
    preds = model.predict(steps)
    k = len(model.classes)
    confusion = [[0] * k for _ in range(k)]
    for lab, pred in zip(labels, preds):
        confusion[idx[lab]][idx[pred]] += 1
    correct = sum(confusion[i][i] for i in range(k))
    accuracy = correct / len(steps)
    print(f"accuracy {accuracy:.4f} on {len(steps)} steps "
          f"(model fingerprint {model.fingerprint})")
    if args.out:
        payload = {
            "accuracy": accuracy, "n": len(steps), "classes": model.classes,
            "confusion": confusion, "model_fingerprint": model.fingerprint,
            "data_fingerprint": corpus_fingerprint(steps),
        }
        Path(args.out).write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        _write_meta(args.out, {
            "command": "eval", "model": str(args.model),
            "data": str(args.data), "task": args.task, "seed": args.seed,
            "fingerprint": model.fingerprint,
        })
    return 0


def cmd_xval(args):
    conf = _load_config(args.config)
    steps = _load_steps(args.data)
    if args.task == "feedback":
        steps = [s for s in steps if s.feedback]
    method = MethodKind(args.method)
    extras = {
        name: _load_steps(path)
        for name, path in _parse_named_paths(args.extra, "--extra").items()
    }
    report = run_xval(method, steps, extra_test_subsets=extras or None,
                      k=args.k, seed=args.seed,
                      cfg=_encoder_for(method, conf),
                      hyper=_hyper_from(conf, args.epochs), task=args.task)
    write_report(report, args.out)
    _write_meta(args.out, {
        "command": "xval", "data": str(args.data), "method": method.value,
        "task": args.task, "k": args.k, "seed": args.seed,
        "fingerprint": report.fingerprint,
    })
    print(f"{method.value} {args.k}-fold: mean {report.main.mean_accuracy:.4f} "
          f"± {report.main.std_accuracy:.4f} "
          f"(pooled {report.main.accuracy:.4f}) fingerprint {report.fingerprint}")
    for name, sub in sorted(report.extra.items()):
        print(f"  {name}: mean {sub.mean_accuracy:.4f} ± {sub.std_accuracy:.4f}")
    return 0


def cmd_transfer(args):
    conf = _load_config(args.config)
    train_steps = _load_steps(args.train)
    test_sets = {
        name: _load_steps(path)
        for name, path in _parse_named_paths(args.test, "--test").items()
    }
    if not test_sets:
        raise UsageError("--test NAME=PATH is required at least once")
    method = MethodKind(args.method)
    reports = run_cross_distribution(
        method, train_steps, test_sets, k=args.k, seed=args.seed,
        cfg=_encoder_for(method, conf), hyper=_hyper_from(conf, args.epochs),
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, report in sorted(reports.items()):
        write_report(report, out_dir / f"{name}.json")
        print(f"{method.value} -> {name}: mean {report.main.mean_accuracy:.4f} "
              f"± {report.main.std_accuracy:.4f} fingerprint {report.fingerprint}")
    _write_meta(out_dir / "transfer", {
        "command": "transfer", "train": str(args.train),
        "tests": {n: str(p) for n, p in
                  _parse_named_paths(args.test, "--test").items()},
        "method": method.value, "k": args.k, "seed": args.seed,
        "fingerprints": {n: r.fingerprint for n, r in sorted(reports.items())},
    })
    return 0


def cmd_finetune(args):
    conf = _load_config(args.config)
    synth = _load_steps(args.synth)
    real = _load_steps(args.real)
    sizes = [int(s) for s in args.sizes.split(",") if s]
    if not sizes:
        raise UsageError("--sizes expects a comma-separated list of integers")
    method = MethodKind(args.method)
    report = run_pretrain_finetune(
        method, synth, real, sizes, seed=args.seed,
        cfg=_encoder_for(method, conf), hyper=_hyper_from(conf, args.epochs),
    )
    Path(args.out).write_text(
        json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    _write_meta(args.out, {
        "command": "finetune", "synth": str(args.synth), "real": str(args.real),
        "sizes": sizes, "method": method.value, "seed": args.seed,
        "fingerprint": report.fingerprint,
    })
    for p in report.points:
        print(f"N={p.n}: scratch {p.scratch_accuracy:.4f} "
              f"finetuned {p.finetuned_accuracy:.4f} delta {p.delta:+.4f}")
    print(f"fingerprint {report.fingerprint}")
    return 0


def cmd_annotate(args):
    model = load_model(args.model)
    feedback_model = load_model(args.feedback_model) if args.feedback_model else None
    lines = Path(args.infile).read_text(encoding="utf-8").splitlines()
    annotations = annotate_transcript(lines, model, feedback_model)
    print(format_annotations(annotations[0].before, annotations))
    print(f"model fingerprint {model.fingerprint}")
    if args.out:
        payload = [asdict(a) for a in annotations]
        Path(args.out).write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        _write_meta(args.out, {
            "command": "annotate", "model": str(args.model),
            "input": str(args.infile), "seed": args.seed,
            "fingerprint": model.fingerprint,
        })
    return 0


def cmd_export_geometry(args):
    model = load_model(args.model)
    geometry = export_operation_geometry(model)
    write_geometry(geometry, args.out)
    k = len(geometry.classes)
    pairs = [
        (geometry.distances[i][j], geometry.classes[i], geometry.classes[j])
        for i in range(k) for j in range(i + 1, k)
    ]
    dist, a, b = min(pairs)
    _write_meta(args.out, {
        "command": "export-geometry", "model": str(args.model),
        "seed": args.seed, "fingerprint": model.fingerprint,
    })
    print(f"wrote {args.out}.distances.tsv and {args.out}.vectors.tsv; "
          f"closest pair {a}~{b} at {dist:.4f} "
          f"fingerprint {model.fingerprint}")
    return 0


def cmd_serve(args):
    model = load_model(args.model)
    feedback_model = load_model(args.feedback_model) if args.feedback_model else None
    serve(model, feedback_model, host=args.host, port=args.port)
    return 0


# ---------------------------------------------------------------- parser


def _add_common(sub, out_required=True, out_help="output path"):
    sub.add_argument("--seed", type=int, default=0, help="random seed")
    sub.add_argument("--config", default=None,
                     help="JSON config file with encoder/hyper overrides")
    sub.add_argument("--out", required=out_required, help=out_help)


def build_parser():
    parser = _Parser(prog="algsteps",
                     description="Solution-step operation embeddings toolkit")
    subs = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = subs.add_parser("gen", help="generate a synthetic step corpus")
    p.add_argument("--n-per-op", type=int, required=True)
    p.add_argument("--entropy", type=int, required=True)
    p.add_argument("--degree", type=int, required=True)
    p.add_argument("--flip", type=float, required=True)
    p.add_argument("--bug-fraction", type=float, default=0.0)
    p.add_argument("--id-prefix", default="s")
    _add_common(p, out_help="output TSV path")
    p.set_defaults(func=cmd_gen)

    p = subs.add_parser("train", help="train one method on a step corpus")
    p.add_argument("--data", required=True, help="input TSV")
    p.add_argument("--method", choices=[m.value for m in MethodKind],
                   default="TE_C")
    p.add_argument("--task", choices=["operation", "feedback"],
                   default="operation")
    p.add_argument("--epochs", type=int, default=None)
    _add_common(p, out_help="model checkpoint path")
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("eval", help="evaluate a model on a step corpus")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--task", choices=["operation", "feedback"],
                   default="operation")
    _add_common(p, out_required=False, out_help="optional JSON results path")
    p.set_defaults(func=cmd_eval)

    p = subs.add_parser("xval", help="k-fold cross-validation")
    p.add_argument("--data", required=True)
    p.add_argument("--method", choices=[m.value for m in MethodKind],
                   default="TE_C")
    p.add_argument("--task", choices=["operation", "feedback"],
                   default="operation")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--extra", action="append",
                   help="NAME=PATH extra test subset, repeatable")
    _add_common(p, out_help="report JSON path")
    p.set_defaults(func=cmd_xval)

    p = subs.add_parser("transfer", help="train on one corpus, test on others")
    p.add_argument("--train", required=True)
    p.add_argument("--test", action="append",
                   help="NAME=PATH test corpus, repeatable")
    p.add_argument("--method", choices=[m.value for m in MethodKind],
                   default="TE_C")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--epochs", type=int, default=None)
    _add_common(p, out_help="output directory for per-test-set reports")
    p.set_defaults(func=cmd_transfer)

    p = subs.add_parser("finetune",
                        help="scratch vs pretrain+finetune accuracy deltas")
    p.add_argument("--synth", required=True)
    p.add_argument("--real", required=True)
    p.add_argument("--sizes", required=True,
                   help="comma-separated real-data sizes, e.g. 50,100")
    p.add_argument("--method", choices=[m.value for m in MethodKind],
                   default="TE_C")
    p.add_argument("--epochs", type=int, default=None)
    _add_common(p, out_help="report JSON path")
    p.set_defaults(func=cmd_finetune)

    p = subs.add_parser("annotate", help="annotate a solution transcript")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="infile", required=True,
                   help="transcript: one expression per line, # comments")
    p.add_argument("--feedback-model", default=None)
    _add_common(p, out_required=False, out_help="optional JSON output path")
    p.set_defaults(func=cmd_annotate)

    p = subs.add_parser("export-geometry",
                        help="export operation embedding distances")
    p.add_argument("--model", required=True)
    _add_common(p, out_help="output basename for .distances/.vectors TSVs")
    p.set_defaults(func=cmd_export_geometry)

    p = subs.add_parser("serve", help="run the HTTP JSON inference service")
    p.add_argument("--model", required=True)
    p.add_argument("--feedback-model", default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    _add_common(p, out_required=False)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "func", None):
            raise UsageError("a subcommand is required")
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(parser.format_usage())
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 1
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
