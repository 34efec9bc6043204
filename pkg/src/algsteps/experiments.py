"""Experiment harness: cross-validation, cross-distribution transfer,
pretrain-then-finetune curves, feedback classification, and operation
geometry exports, with deterministic JSON/TSV reports."""

import hashlib
import json
import random
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .data import StepRecord, kfold, step_from_record
from .encoders import EncoderKind, EncoderConfig
from .generate import MathOp
from .models import (
    Hyper,
    MethodKind,
    UnknownLabel,
    _TRANS_METHODS,
    corpus_fingerprint,
    train,
)

__all__ = [
    "MethodKind",
    "ExperimentReport",
    "SubsetResult",
    "OperationGeometry",
    "FinetunePoint",
    "PretrainFinetuneReport",
    "LeakageDetected",
    "WrongModelKind",
    "desk_config",
    "run_xval",
    "run_cross_distribution",
    "run_pretrain_finetune",
    "run_feedback_task",
    "export_operation_geometry",
    "write_report",
    "write_geometry",
]


class LeakageDetected(Exception):
    """Train and test sets share step ids."""


class WrongModelKind(Exception):
    """Operation geometry requires a translation model."""


def desk_config(kind):
    """Desk-scale experiment dims: paper-shape encoders at reduced width.

    The adapter output stays at the pinned 32; the encoder hidden width is
    reduced so a full five-fold run fits the single-core runtime budget.
    """
    return EncoderConfig(
        kind=kind,
        symbol_embed_dim=32,
        hidden_dim=64,
        adapter_hidden=64,
        adapter_out_dim=32,
    )


# ---------------------------------------------------------------- reports


@dataclass
class SubsetResult:
    """Accuracy and confusion for one test subset, aggregated over folds."""

    fold_accuracies: list
    accuracy: float
    mean_accuracy: float
    std_accuracy: float
    confusion: list
    confusion_pct: list

    def to_json(self):
        return asdict(self)


@dataclass
class ExperimentReport:
    """One experiment's results; runtime is in-memory only, never in files."""

    method: str
    task: str
    classes: list
    k: int
    seed: int
    fingerprint: str
    encoder: dict
    hyper: dict
    main: SubsetResult
    extra: dict
    distances: list
    loss_curves: list
    runtime_seconds: float

    def to_json(self):
        return {
            "method": self.method,
            "task": self.task,
            "classes": self.classes,
            "k": self.k,
            "seed": self.seed,
            "fingerprint": self.fingerprint,
            "encoder": self.encoder,
            "hyper": self.hyper,
            "main": self.main.to_json(),
            "extra": {name: sub.to_json() for name, sub in self.extra.items()},
            "distances": self.distances,
            "loss_curves": self.loss_curves,
        }


@dataclass
class FinetunePoint:
    """Scratch vs pretrain+finetune accuracy at one real-data size."""

    n: int
    scratch_accuracy: float
    finetuned_accuracy: float
    delta: float


@dataclass
class PretrainFinetuneReport:
    method: str
    points: list
    seed: int
    fingerprint: str
    runtime_seconds: float

    def to_json(self):
        return {
            "method": self.method,
            "seed": self.seed,
            "fingerprint": self.fingerprint,
            "points": [asdict(p) for p in self.points],
        }


@dataclass
class OperationGeometry:
    """Pairwise operation-embedding distances plus the raw vectors."""

    classes: list
    distances: np.ndarray
    vectors: np.ndarray


# ---------------------------------------------------------------- helpers


def _as_step(x):
    return step_from_record(x) if isinstance(x, StepRecord) else x


def _label(step, task):
    return step.op.name if task == "operation" else step.feedback


def _classes_for(task, labels):
    observed = set(labels)
    if task == "operation":
        return [op.name for op in MathOp if op.name in observed]
    return sorted(observed)


def _encoder_meta(cfg):
    return {
        "kind": cfg.kind.value,
        "symbol_embed_dim": cfg.symbol_embed_dim,
        "hidden_dim": cfg.hidden_dim,
        "adapter_hidden": cfg.adapter_hidden,
        "adapter_out_dim": cfg.adapter_out_dim,
        "cnn_widths": list(cfg.cnn_widths),
        "cnn_filters": cfg.cnn_filters,
    }


def _fingerprint(*parts):
    digest = hashlib.sha256()
    for p in parts:
        digest.update(str(p).encode("utf-8"))
        digest.update(b"\x1f")
    return digest.hexdigest()[:16]


def _subset_result(fold_accuracies, confusion):
    conf = np.asarray(confusion, dtype=np.int64)
    k = len(fold_accuracies)
    trace = int(np.trace(conf))
    total = int(conf.sum())
    accuracy = trace / total if total else 0.0
    mean = sum(fold_accuracies) / k
    std = float(np.sqrt(sum((a - mean) ** 2 for a in fold_accuracies) / k))
    pct = []
    for row in conf:
        s = int(row.sum())
        pct.append([100.0 * int(c) / s if s else 0.0 for c in row])
    return SubsetResult(
        fold_accuracies=list(fold_accuracies),
        accuracy=accuracy,
        mean_accuracy=mean,
        std_accuracy=std,
        confusion=[[int(c) for c in row] for row in conf],
        confusion_pct=pct,
    )


class _Scorer:
    """Accumulates a confusion matrix and per-fold accuracies."""

    def __init__(self, classes):
        self.classes = classes
        self.idx = {c: i for i, c in enumerate(classes)}
        self.conf = np.zeros((len(classes), len(classes)), dtype=np.int64)
        self.fold_accuracies = []

    def score_fold(self, true_labels, predictions):
        correct = 0
        for lab, pred in zip(true_labels, predictions):
            if lab not in self.idx:
                raise UnknownLabel(f"test label {lab!r} not in {self.classes}")
            ti, pi = self.idx[lab], self.idx[pred]
            self.conf[ti, pi] += 1
            correct += int(ti == pi)
        self.fold_accuracies.append(correct / len(true_labels))

    def result(self):
        return _subset_result(self.fold_accuracies, self.conf)


def _geometry_distances(model):
    geo = export_operation_geometry(model)
    return [[float(v) for v in row] for row in geo.distances]


# ---------------------------------------------------------------- protocols


def run_xval(method, records, extra_test_subsets=None, k=5, seed=0, cfg=None,
             hyper=None, task="operation"):
    """K-fold CV: train on K-1 folds, test the held-out fold plus each extra
    subset in full; aggregates mean and population std over folds."""
    t0 = time.perf_counter()
    hyper = hyper or Hyper()
    steps = [_as_step(r) for r in records]
    labels = [_label(s, task) for s in steps]
    classes = _classes_for(task, labels)
    extras = {
        name: [_as_step(r) for r in recs]
        for name, recs in (extra_test_subsets or {}).items()
    }
    plan = kfold(steps, k, seed, key=lambda s: _label(s, task))

    main = _Scorer(classes)
    extra_scores = {name: _Scorer(classes) for name in extras}
    curves = []
    model = None
    for fold in range(k):
        train_idx, test_idx = plan.train_test(fold)
        model = train(
            method,
            [steps[i] for i in train_idx],
            [labels[i] for i in train_idx],
            classes,
            cfg=cfg,
            hyper=hyper,
            seed=seed * 1000 + fold,
        )
        curves.append(model.loss_curve)
        main.score_fold(
            [labels[i] for i in test_idx],
            model.predict([steps[i] for i in test_idx]),
        )
        for name, sub_steps in extras.items():
            extra_scores[name].score_fold(
                [_label(s, task) for s in sub_steps], model.predict(sub_steps)
            )

    distances = None
    if method in _TRANS_METHODS:
        distances = _geometry_distances(model)
    fp = _fingerprint(
        method.value, task, k, seed, _encoder_meta(model.cfg), asdict(hyper),
        corpus_fingerprint(steps),
        *(corpus_fingerprint(extras[n]) for n in sorted(extras)),
    )
    return ExperimentReport(
        method=method.value,
        task=task,
        classes=classes,
        k=k,
        seed=seed,
        fingerprint=fp,
        encoder=_encoder_meta(model.cfg),
        hyper=asdict(hyper),
        main=main.result(),
        extra={name: s.result() for name, s in extra_scores.items()},
        distances=distances,
        loss_curves=curves,
        runtime_seconds=time.perf_counter() - t0,
    )


def run_feedback_task(method, bug_records, k=5, seed=0, cfg=None, hyper=None):
    """Feedback-label classification on the BUG subset: xval machinery with
    the feedback label set."""
    return run_xval(method, bug_records, k=k, seed=seed, cfg=cfg, hyper=hyper,
                    task="feedback")


def run_cross_distribution(method, train_records, test_record_sets, k=5,
                           seed=0, cfg=None, hyper=None, task="operation"):
    """Train K fold-models on one source, test each on full held-out sets.

    Returns one ExperimentReport per test set. Train/test id sets must be
    disjoint (ids are checked, so corpora must carry distinct id prefixes).
    """
    t0 = time.perf_counter()
    hyper = hyper or Hyper()
    train_steps = [_as_step(r) for r in train_records]
    train_ids = {s.step_id for s in train_steps if s.step_id}
    test_sets = {}
    for name, recs in test_record_sets.items():
        sub = [_as_step(r) for r in recs]
        overlap = train_ids & {s.step_id for s in sub if s.step_id}
        if overlap:
            raise LeakageDetected(
                f"test set {name!r} shares {len(overlap)} step ids with the "
                f"training set, e.g. {sorted(overlap)[:3]}"
            )
        test_sets[name] = sub

    labels = [_label(s, task) for s in train_steps]
    classes = _classes_for(task, labels)
    plan = kfold(train_steps, k, seed, key=lambda s: _label(s, task))
    scorers = {name: _Scorer(classes) for name in test_sets}
    curves = []
    model = None
    for fold in range(k):
        train_idx, _ = plan.train_test(fold)
        model = train(
            method,
            [train_steps[i] for i in train_idx],
            [labels[i] for i in train_idx],
            classes,
            cfg=cfg,
            hyper=hyper,
            seed=seed * 1000 + fold,
        )
        curves.append(model.loss_curve)
        for name, sub_steps in test_sets.items():
            scorers[name].score_fold(
                [_label(s, task) for s in sub_steps], model.predict(sub_steps)
            )

    distances = None
    if method in _TRANS_METHODS:
        distances = _geometry_distances(model)
    runtime = time.perf_counter() - t0
    reports = {}
    for name, scorer in scorers.items():
        fp = _fingerprint(
            method.value, task, k, seed, _encoder_meta(model.cfg),
            asdict(hyper), corpus_fingerprint(train_steps), name,
            corpus_fingerprint(test_sets[name]),
        )
        reports[name] = ExperimentReport(
            method=method.value,
            task=task,
            classes=classes,
            k=k,
            seed=seed,
            fingerprint=fp,
            encoder=_encoder_meta(model.cfg),
            hyper=asdict(hyper),
            main=scorer.result(),
            extra={},
            distances=distances,
            loss_curves=curves,
            runtime_seconds=runtime,
        )
    return reports


def run_pretrain_finetune(method, synth_records, real_records, real_sizes,
                          seed=0, cfg=None, hyper=None, finetune_epochs=10):
    """Scratch vs pretrain+finetune accuracy deltas over real-data sizes.

    For each N: train from scratch on N real steps, and separately fine-tune
    a synthetic-pretrained model on the same N steps for finetune_epochs;
    both are scored on the held-out remainder of the real corpus.
    """
    t0 = time.perf_counter()
    hyper = hyper or Hyper()
    synth = [_as_step(r) for r in synth_records]
    real = [_as_step(r) for r in real_records]
    for n in real_sizes:
        if n >= len(real):
            raise ValueError(
                f"real size {n} leaves no held-out remainder of {len(real)} steps"
            )
    synth_labels = [s.op.name for s in synth]
    real_labels = [s.op.name for s in real]
    observed = set(synth_labels) | set(real_labels)
    classes = [op.name for op in MathOp if op.name in observed]

    pretrained = train(method, synth, synth_labels, classes, cfg=cfg,
                       hyper=hyper, seed=seed)
    rng = random.Random(seed)
    points = []
    for n in real_sizes:
        idx = set(rng.sample(range(len(real)), n))
        train_steps = [real[i] for i in sorted(idx)]
        train_labels = [real_labels[i] for i in sorted(idx)]
        eval_steps = [real[i] for i in range(len(real)) if i not in idx]
        eval_labels = [real_labels[i] for i in range(len(real)) if i not in idx]

        scratch = train(method, train_steps, train_labels, classes, cfg=cfg,
                        hyper=hyper, seed=seed * 7 + n)
        ft_hyper = Hyper(**{**asdict(hyper), "epochs": finetune_epochs})
        finetuned = train(method, train_steps, train_labels, classes,
                          hyper=ft_hyper, seed=seed * 7 + n,
                          warm_start=pretrained)

        def acc(model):
            preds = model.predict(eval_steps)
            return sum(p == t for p, t in zip(preds, eval_labels)) / len(eval_labels)

        a, b = acc(scratch), acc(finetuned)
        points.append(FinetunePoint(
            n=n, scratch_accuracy=a, finetuned_accuracy=b, delta=b - a
        ))

    fp = _fingerprint(
        method.value, "finetune", seed, list(real_sizes), asdict(hyper),
        finetune_epochs, corpus_fingerprint(synth), corpus_fingerprint(real),
    )
    return PretrainFinetuneReport(
        method=method.value,
        points=points,
        seed=seed,
        fingerprint=fp,
        runtime_seconds=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------- geometry


def export_operation_geometry(model):
    """Pairwise Euclidean distances between operation embeddings h_z.

    Accepts a TrainedModel for a Trans* method, or a bare TransE/TransR model.
    """
    if hasattr(model, "trans"):
        inner = model.trans
        if inner is None:
            raise WrongModelKind(
                f"{model.method.value} has no operation embeddings; "
                "geometry needs a TransE or TransR model"
            )
        classes = model.classes
    elif hasattr(model, "h") and hasattr(model, "classes"):
        inner = model
        classes = model.classes
    else:
        raise WrongModelKind(f"cannot read operation embeddings from {model!r}")
    vectors = np.array(inner.h.data, dtype=np.float64, copy=True)
    diff = vectors[:, None, :] - vectors[None, :, :]
    distances = np.sqrt(np.sum(diff * diff, axis=2))
    return OperationGeometry(classes=list(classes), distances=distances,
                             vectors=vectors)


# ---------------------------------------------------------------- files


def _canonical_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write_matrix_tsv(path, corner, classes, rows, fmt=str):
    lines = [corner + "\t" + "\t".join(classes)]
    for cls, row in zip(classes, rows):
        lines.append(cls + "\t" + "\t".join(fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_report(report, path):
    """Write the JSON report (runtime excluded) plus confusion/distance TSVs."""
    path = Path(path)
    path.write_text(_canonical_json(report.to_json()), encoding="utf-8")
    base = str(path)[: -len(path.suffix)] if path.suffix else str(path)
    _write_matrix_tsv(
        base + ".confusion.tsv", "true\\pred", report.classes,
        report.main.confusion,
    )
    for name, sub in report.extra.items():
        _write_matrix_tsv(
            f"{base}.confusion.{name}.tsv", "true\\pred", report.classes,
            sub.confusion,
        )
    if report.distances is not None:
        _write_matrix_tsv(
            base + ".distances.tsv", "operation", report.classes,
            report.distances, fmt=lambda v: str(float(v)),
        )


def write_geometry(geometry, base_path):
    """Write the distance matrix and raw vectors as TSV files."""
    base = str(base_path)
    _write_matrix_tsv(
        base + ".distances.tsv", "operation", geometry.classes,
        geometry.distances, fmt=lambda v: str(float(v)),
    )
    dim = np.asarray(geometry.vectors).shape[1]
    lines = ["operation\t" + "\t".join(f"d{i}" for i in range(dim))]
    for cls, vec in zip(geometry.classes, geometry.vectors):
        lines.append(cls + "\t" + "\t".join(str(float(v)) for v in vec))
    Path(base + ".vectors.tsv").write_text("\n".join(lines) + "\n",
                                           encoding="utf-8")
