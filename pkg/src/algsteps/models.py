"""Math-operation representation learners: softmax head, TransE, TransR.

All three consume encoder pair embeddings. The softmax head scores the
concatenated (or fused) pair embedding per class; the translation models
place each operation as a vector h_z (TransE) or a projection plus vector
(TransR) so that e1 translates onto e2. One train() entry point drives the
five method kinds end to end, jointly with the encoder by default.
"""

import hashlib
import random
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .encoders import (
    EncoderConfig,
    EncoderKind,
    adapt_batch,
    encode_pair_batch,
    encode_tree_batch,
    init_encoder_params,
)
from .expr import print_expr
from .optim import Adam
from .tensor import (
    ShapeMismatch,
    Tape,
    Tensor,
    add,
    concat,
    embedding_lookup,
    hinge,
    matmul,
    mul,
    reduce_sum,
    relu,
    softmax_cross_entropy,
    sub,
    transpose,
)


class UnknownLabel(Exception):
    """A label outside the model's class set."""


class InsufficientDiversity(Exception):
    """Too few distinct expressions or operations to sample corruptions."""


class MethodKind(Enum):
    GRU_C = "GRU_C"
    TE_C = "TE_C"
    CNN_C = "CNN_C"
    TE_TRANSE = "TE_TRANSE"
    TE_TRANSR = "TE_TRANSR"


_METHOD_ENCODER = {
    MethodKind.GRU_C: EncoderKind.GRU,
    MethodKind.TE_C: EncoderKind.TREE,
    MethodKind.CNN_C: EncoderKind.CNN,
    MethodKind.TE_TRANSE: EncoderKind.TREE,
    MethodKind.TE_TRANSR: EncoderKind.TREE,
}

_TRANS_METHODS = (MethodKind.TE_TRANSE, MethodKind.TE_TRANSR)


@dataclass
class Hyper:
    """Training hyperparameters; lr/batch/epochs follow the pinned protocol."""

    lr: float = 0.001
    batch: int = 64
    epochs: int = 10
    margin: float = 1.0
    k_corruptions: int = 1
    train_encoder: bool = True


# ---------------------------------------------------------------- model types


class SoftmaxHead:
    """Per-class weight vectors over the pair embedding."""

    def __init__(self, classes, pair_dim, seed=0):
        rng = np.random.default_rng(seed)
        self.classes = list(classes)
        k = len(self.classes)
        self.W = Tensor(rng.normal(0.0, 1.0 / np.sqrt(pair_dim), (pair_dim, k)),
                        requires_grad=True, name="head.W")
        self.b = Tensor(np.zeros(k), requires_grad=True, name="head.b")

    def params(self):
        return [self.W, self.b]

    def logits_batch(self, emb):
        return add(matmul(emb, self.W), self.b)


class TransEModel:
    """Operation embeddings h_z with d = ||e1 + h_z - e2||^2."""

    kind = "transe"

    def __init__(self, classes, dim, seed=0):
        rng = np.random.default_rng(seed)
        self.classes = list(classes)
        self.dim = dim
        self.h = Tensor(rng.normal(0.0, 0.1, (len(self.classes), dim)),
                        requires_grad=True, name="trans.h")

    def params(self):
        return [self.h]

    def distance_batch(self, e1, e2, z_idx):
        """Differentiable per-row distances for aligned (B, D) batches."""
        trans = embedding_lookup(self.h, np.asarray(z_idx, dtype=np.int64))
        diff = add(sub(e1, e2), trans)
        return reduce_sum(mul(diff, diff), axis=1)

    def distance_matrix(self, e1, e2):
        """(B, K) distances to every class, plain numpy."""
        diff = (e1 - e2)[:, None, :] + self.h.data[None, :, :]
        return np.sum(diff * diff, axis=2)


class TransRModel:
    """Per-operation projections M_z plus embeddings h_z.

    d = ||ReLU(M_z e1) + h_z - ReLU(M_z e2)||^2; M_z starts near identity so
    early training behaves like TransE.
    """

    kind = "transr"

    def __init__(self, classes, dim, seed=0):
        rng = np.random.default_rng(seed)
        self.classes = list(classes)
        self.dim = dim
        self.h = Tensor(rng.normal(0.0, 0.1, (len(self.classes), dim)),
                        requires_grad=True, name="trans.h")
        self.M = [
            Tensor(np.eye(dim) + rng.normal(0.0, 0.01, (dim, dim)),
                   requires_grad=True, name=f"trans.M{i}")
            for i in range(len(self.classes))
        ]

    def params(self):
        return [self.h] + list(self.M)

    def distance_batch(self, e1, e2, z_idx):
        """Differentiable per-row distances, grouped by class for the matmuls."""
        z_idx = np.asarray(z_idx, dtype=np.int64)
        pieces = []
        positions = []
        for k in np.unique(z_idx):
            sel = np.where(z_idx == k)[0]
            m_t = transpose(self.M[int(k)])
            p1 = relu(matmul(embedding_lookup(e1, sel), m_t))
            p2 = relu(matmul(embedding_lookup(e2, sel), m_t))
            trans = embedding_lookup(self.h, np.full(len(sel), k, dtype=np.int64))
            pieces.append(add(sub(p1, p2), trans))
            positions.append(sel)
        order = np.concatenate(positions)
        diff = embedding_lookup(concat(pieces, axis=0), np.argsort(order))
        return reduce_sum(mul(diff, diff), axis=1)

    def distance_matrix(self, e1, e2):
        out = np.empty((e1.shape[0], len(self.classes)))
        for k, m in enumerate(self.M):
            p1 = np.maximum(e1 @ m.data.T, 0.0)
            p2 = np.maximum(e2 @ m.data.T, 0.0)
            diff = p1 + self.h.data[k] - p2
            out[:, k] = np.sum(diff * diff, axis=1)
        return out


# ---------------------------------------------------------------- primitives


def classify_softmax(pair_embedding, head):
    """Probability distribution over the head's classes."""
    emb = np.asarray(pair_embedding, dtype=np.float64)
    logits = matmul(Tensor(emb), head.W).data + head.b.data
    shifted = logits - logits.max()
    expd = np.exp(shifted)
    return expd / expd.sum()


def cross_entropy_loss(logits, labels, classes):
    """Mean negative log-probability of the true class over the batch."""
    idx = []
    for lab in labels:
        if lab not in classes:
            raise UnknownLabel(f"label {lab!r} is not one of {classes}")
        idx.append(classes.index(lab))
    return softmax_cross_entropy(logits, idx)


def transe_distance(e1, e2, h_z):
    """||e1 + h_z - e2||^2 for plain vectors."""
    e1, e2, h_z = (np.asarray(v, dtype=np.float64) for v in (e1, e2, h_z))
    if not (e1.shape == e2.shape == h_z.shape):
        raise ShapeMismatch(
            f"transe_distance: shapes {e1.shape}, {e2.shape}, {h_z.shape} differ"
        )
    diff = e1 + h_z - e2
    return float(np.sum(diff * diff))


def transr_distance(e1, e2, m_z, h_z):
    """||ReLU(M_z e1) + h_z - ReLU(M_z e2)||^2 for plain vectors."""
    e1, e2, h_z = (np.asarray(v, dtype=np.float64) for v in (e1, e2, h_z))
    m_z = np.asarray(m_z, dtype=np.float64)
    if e1.shape != e2.shape or e1.shape != h_z.shape or m_z.shape != (e1.size, e1.size):
        raise ShapeMismatch(
            f"transr_distance: e {e1.shape}/{e2.shape}, M {m_z.shape}, h {h_z.shape}"
        )
    diff = np.maximum(m_z @ e1, 0.0) + h_z - np.maximum(m_z @ e2, 0.0)
    return float(np.sum(diff * diff))


class _Corruptor:
    """Uniform corruption sampler over a training split's pools."""

    def __init__(self, split):
        seen = set()
        self.exprs = []
        labels = []
        for e1, e2, z in split:
            for e in (e1, e2):
                if e not in seen:
                    seen.add(e)
                    self.exprs.append(e)
            if z not in labels:
                labels.append(z)
        self.labels = labels
        if len(self.exprs) < 2 or len(self.labels) < 2:
            raise InsufficientDiversity(
                f"need >= 2 distinct expressions and operations, got "
                f"{len(self.exprs)} and {len(self.labels)}"
            )

    def _replacement(self, pool, current, rng):
        while True:
            cand = pool[rng.randrange(len(pool))]
            if cand != current:
                return cand

    def sample(self, triple, k, rng):
        e1, e2, z = triple
        out = []
        for _ in range(k):
            which = rng.randrange(3)
            if which == 0:
                out.append((self._replacement(self.exprs, e1, rng), e2, z))
            elif which == 1:
                out.append((e1, self._replacement(self.exprs, e2, rng), z))
            else:
                out.append((e1, e2, self._replacement(self.labels, z, rng)))
        return out


def sample_corruptions(triple, train_split, k=1, rng=None):
    """k corrupted triples, each differing from the observed one in one element."""
    return _Corruptor(train_split).sample(triple, k, rng or random.Random())


def ranking_loss(model, observed, corruptions, margin):
    """L = L1 + L2 = sum(d_pos) + sum(hinge(margin + d_pos - d_neg)).

    observed/corruptions are (E1, E2, z_idx) with aligned rows; the corruption
    batch may hold k rows per observed row, in observed order repeated k times.
    """
    e1, e2, z = observed
    n1, n2, zn = corruptions
    d_pos = model.distance_batch(e1, e2, z)
    d_neg = model.distance_batch(n1, n2, zn)
    n_pos, n_neg = len(np.atleast_1d(z)), len(np.atleast_1d(zn))
    if n_neg % n_pos:
        raise ShapeMismatch(
            f"ranking_loss: {n_neg} corruptions for {n_pos} observed triples"
        )
    reps = n_neg // n_pos
    d_pos_rep = d_pos if reps == 1 else concat([d_pos] * reps, axis=0)
    l2 = reduce_sum(hinge(add(sub(d_pos_rep, d_neg), margin)))
    return add(reduce_sum(d_pos), l2)


def classify_nn(e1, e2, model):
    """Nearest-neighbor operation: argmin distance, ties by class order."""
    e1 = np.asarray(e1, dtype=np.float64)[None, :]
    e2 = np.asarray(e2, dtype=np.float64)[None, :]
    dists = model.distance_matrix(e1, e2)[0]
    return model.classes[int(np.argmin(dists))], dists


def corpus_fingerprint(steps):
    """Stable 16-hex-digit digest of a step corpus."""
    digest = hashlib.sha256()
    for s in steps:
        line = "\t".join(
            (s.step_id, print_expr(s.before), print_expr(s.after),
             s.op.name, s.outcome.name, s.difficulty, s.feedback)
        )
        digest.update(line.encode("utf-8"))
        digest.update(b"\n")
    return digest.hexdigest()[:16]


# ---------------------------------------------------------------- training


@dataclass
class TrainedModel:
    """A trained method: encoder + adapter parameters plus the output model."""

    method: MethodKind
    cfg: EncoderConfig
    enc_params: dict
    head: SoftmaxHead
    trans: object
    classes: list
    hyper: Hyper
    loss_curve: list
    fingerprint: str

    def _pair_embed(self, steps):
        return encode_pair_batch(steps, self.cfg, self.enc_params).data

    def _expr_embed(self, exprs):
        pre = encode_tree_batch(exprs, self.cfg, self.enc_params)
        return adapt_batch(pre, self.cfg, self.enc_params).data

    def scores(self, steps, chunk=256):
        """(B, K) class scores: softmax probabilities or negated distances."""
        rows = []
        for lo in range(0, len(steps), chunk):
            part = steps[lo : lo + chunk]
            if self.trans is None:
                logits = self._pair_embed(part) @ self.head.W.data + self.head.b.data
                shifted = logits - logits.max(axis=1, keepdims=True)
                expd = np.exp(shifted)
                rows.append(expd / expd.sum(axis=1, keepdims=True))
            else:
                e1 = self._expr_embed([_before(s) for s in part])
                e2 = self._expr_embed([_after(s) for s in part])
                rows.append(-self.trans.distance_matrix(e1, e2))
        return np.vstack(rows)

    def predict_proba(self, steps):
        """(B, K) probabilities; distances pass through softmax(-d)."""
        scores = self.scores(steps)
        if self.trans is None:
            return scores
        shifted = scores - scores.max(axis=1, keepdims=True)
        expd = np.exp(shifted)
        return expd / expd.sum(axis=1, keepdims=True)

    def predict(self, steps):
        scores = self.scores(steps)
        return [self.classes[int(i)] for i in np.argmax(scores, axis=1)]


def _before(s):
    return s[0] if isinstance(s, (tuple, list)) else s.before


def _after(s):
    return s[1] if isinstance(s, (tuple, list)) else s.after


def _pair_dim(cfg):
    if cfg.kind == EncoderKind.TREE:
        return 2 * cfg.adapter_out_dim
    return cfg.adapter_out_dim


def _batched_order(steps, batch_size):
    """Length-bucketed batches: sort by printed size, then slice."""
    sizes = [
        len(print_expr(_before(s))) + len(print_expr(_after(s))) for s in steps
    ]
    order = sorted(range(len(steps)), key=lambda i: (sizes[i], i))
    return [order[lo : lo + batch_size] for lo in range(0, len(order), batch_size)]


def _clone_tensor(t):
    return Tensor(t.data.copy(), requires_grad=True, name=t.name)


def _clone_state(model):
    """Deep-copy a TrainedModel's parameters for warm-started training."""
    enc_params = {k: _clone_tensor(v) for k, v in model.enc_params.items()}
    head = None
    trans = None
    if model.head is not None:
        head = SoftmaxHead(model.classes, model.head.W.data.shape[0], seed=0)
        head.W = _clone_tensor(model.head.W)
        head.b = _clone_tensor(model.head.b)
    if model.trans is not None:
        cls = TransEModel if model.trans.kind == "transe" else TransRModel
        trans = cls(model.classes, model.trans.dim, seed=0)
        trans.h = _clone_tensor(model.trans.h)
        if model.trans.kind == "transr":
            trans.M = [_clone_tensor(m) for m in model.trans.M]
    return enc_params, head, trans


def train(method, steps, labels, classes, cfg=None, hyper=None, seed=0,
          warm_start=None):
    """Train one method kind end to end; returns the model and its loss curve.

    warm_start continues from a copy of an existing TrainedModel's parameters
    (the source model is left untouched); method and classes must match.
    """
    hyper = hyper or Hyper()
    classes = list(classes)
    if len(labels) != len(steps):
        raise ValueError("train: labels and steps must align")
    for lab in labels:
        if lab not in classes:
            raise UnknownLabel(f"label {lab!r} is not one of {classes}")
    class_idx = {c: i for i, c in enumerate(classes)}
    label_idx = np.array([class_idx[lab] for lab in labels], dtype=np.int64)

    want_kind = _METHOD_ENCODER[method]
    if warm_start is not None:
        if warm_start.method != method or warm_start.classes != classes:
            raise ValueError("warm_start model does not match method/classes")
        cfg = warm_start.cfg
    elif cfg is None:
        cfg = EncoderConfig(kind=want_kind)
    if cfg.kind != want_kind:
        raise ValueError(f"{method.value} requires a {want_kind.value} encoder")

    if warm_start is not None:
        enc_params, head, trans = _clone_state(warm_start)
    else:
        enc_params = init_encoder_params(cfg, seed)
        head = None
        trans = None
    if method in _TRANS_METHODS:
        triples = [(_before(s), _after(s), lab) for s, lab in zip(steps, labels)]
        corruptor = _Corruptor(triples)
        if trans is None:
            model_cls = TransEModel if method == MethodKind.TE_TRANSE else TransRModel
            trans = model_cls(classes, cfg.adapter_out_dim, seed + 1)
        model_params = trans.params()
    else:
        if head is None:
            head = SoftmaxHead(classes, _pair_dim(cfg), seed + 1)
        model_params = head.params()

    trainable = list(model_params)
    if hyper.train_encoder:
        trainable = list(enc_params.values()) + trainable
    opt = Adam(trainable, lr=hyper.lr)
    rng = random.Random(seed)
    batches = _batched_order(steps, hyper.batch)

    curve = []
    for _ in range(hyper.epochs):
        rng.shuffle(batches)
        total = 0.0
        for batch in batches:
            opt.zero_grad()
            with Tape() as tape:
                if trans is None:
                    emb = encode_pair_batch([steps[i] for i in batch], cfg, enc_params)
                    loss = softmax_cross_entropy(
                        head.logits_batch(emb), label_idx[batch]
                    )
                    total += loss.item() * len(batch)
                    scaled = loss
                else:
                    loss = _trans_batch_loss(
                        steps, labels, label_idx, batch, cfg, enc_params,
                        trans, corruptor, hyper, rng, class_idx,
                    )
                    total += loss.item()
                    scaled = mul(loss, 1.0 / len(batch))
            tape.backward(scaled, params=trainable)
            opt.step()
        curve.append(total / len(steps))

    return TrainedModel(
        method=method,
        cfg=cfg,
        enc_params=enc_params,
        head=head,
        trans=trans,
        classes=classes,
        hyper=hyper,
        loss_curve=curve,
        fingerprint=corpus_fingerprint(steps),
    )


def _trans_batch_loss(steps, labels, label_idx, batch, cfg, enc_params,
                      trans, corruptor, hyper, rng, class_idx):
    """Ranking loss over one batch: encode unique expressions once, gather rows."""
    pos = [(_before(steps[i]), _after(steps[i]), labels[i]) for i in batch]
    per_triple = [corruptor.sample(t, hyper.k_corruptions, rng) for t in pos]
    # observed order repeated k times, matching the tiling in ranking_loss
    negs = [per_triple[j][c] for c in range(hyper.k_corruptions)
            for j in range(len(pos))]
    uniq = {}
    for e1, e2, _ in pos + negs:
        for e in (e1, e2):
            if e not in uniq:
                uniq[e] = len(uniq)
    all_emb = adapt_batch(
        encode_tree_batch(list(uniq), cfg, enc_params), cfg, enc_params
    )

    def gather(trips):
        i1 = [uniq[t[0]] for t in trips]
        i2 = [uniq[t[1]] for t in trips]
        z = np.array([class_idx[t[2]] for t in trips], dtype=np.int64)
        return (embedding_lookup(all_emb, i1), embedding_lookup(all_emb, i2), z)

    return ranking_loss(trans, gather(pos), gather(negs), hyper.margin)


def fit_transe_frozen(e1, e2, z_idx, n_classes, margin=1.0, seed=0):
    """Fit TransE vectors on frozen embeddings; returns the (K, D) array.

    Uses staged learning rates so the final iterates settle well inside the
    1e-3 band around the optimum.
    """
    e1 = np.asarray(e1, dtype=np.float64)
    e2 = np.asarray(e2, dtype=np.float64)
    z_idx = np.asarray(z_idx, dtype=np.int64)
    n = len(z_idx)
    model = TransEModel([str(i) for i in range(n_classes)], e1.shape[1], seed)
    rng = random.Random(seed)
    t_e1, t_e2 = Tensor(e1), Tensor(e2)
    for lr, iters in ((0.05, 1500), (0.01, 1500), (1e-3, 1000), (1e-4, 1000)):
        opt = Adam([model.h], lr=lr)
        for _ in range(iters):
            # corrupt one element per row: e1 row, e2 row, or the class
            which = np.array([rng.randrange(3) for _ in range(n)])
            perm = np.array([rng.randrange(n) for _ in range(n)])
            neg_z = z_idx.copy()
            for i in np.where(which == 2)[0]:
                neg_z[i] = (z_idx[i] + 1 + rng.randrange(n_classes - 1)) % n_classes
            n_e1 = Tensor(np.where((which == 0)[:, None], e1[perm], e1))
            n_e2 = Tensor(np.where((which == 1)[:, None], e2[perm], e2))
            opt.zero_grad()
            with Tape() as tape:
                loss = mul(
                    ranking_loss(model, (t_e1, t_e2, z_idx), (n_e1, n_e2, neg_z), margin),
                    1.0 / n,
                )
            tape.backward(loss, params=[model.h])
            opt.step()
    return model.h.data.copy()


# ---------------------------------------------------------------- persistence


def save_model(path, model):
    """Checkpoint a TrainedModel with its configuration header."""
    params = {f"enc.{k}": v for k, v in model.enc_params.items()}
    if model.head is not None:
        params["head.W"] = model.head.W
        params["head.b"] = model.head.b
    if model.trans is not None:
        params["trans.h"] = model.trans.h
        if model.trans.kind == "transr":
            for i, m in enumerate(model.trans.M):
                params[f"trans.M{i}"] = m
    cfg = model.cfg
    vocab_chars = [c for c, _ in sorted(cfg.vocab.items(), key=lambda kv: kv[1])]
    meta = {
        "model_kind": model.method.value,
        "encoder": {
            "kind": cfg.kind.value,
            "symbol_embed_dim": cfg.symbol_embed_dim,
            "hidden_dim": cfg.hidden_dim,
            "adapter_hidden": cfg.adapter_hidden,
            "adapter_out_dim": cfg.adapter_out_dim,
            "max_depth": cfg.max_depth,
            "cnn_widths": list(cfg.cnn_widths),
            "cnn_filters": cfg.cnn_filters,
            "vocab": vocab_chars,
        },
        "classes": model.classes,
        "hyper": asdict(model.hyper),
        "fingerprint": model.fingerprint,
        "loss_curve": model.loss_curve,
    }
    save_checkpoint(path, params, meta=meta)


def load_model(path):
    """Rebuild a TrainedModel from a checkpoint written by save_model."""
    arrays, meta = load_checkpoint(path)
    enc_meta = meta["encoder"]
    cfg = EncoderConfig(
        kind=EncoderKind(enc_meta["kind"]),
        symbol_embed_dim=enc_meta["symbol_embed_dim"],
        hidden_dim=enc_meta["hidden_dim"],
        adapter_hidden=enc_meta["adapter_hidden"],
        adapter_out_dim=enc_meta["adapter_out_dim"],
        max_depth=enc_meta["max_depth"],
        cnn_widths=tuple(enc_meta["cnn_widths"]),
        cnn_filters=enc_meta["cnn_filters"],
        vocab={c: i for i, c in enumerate(enc_meta["vocab"])},
    )
    method = MethodKind(meta["model_kind"])
    classes = list(meta["classes"])
    enc_params = {
        name[len("enc."):]: Tensor(arr, requires_grad=True, name=name[len("enc."):])
        for name, arr in arrays.items()
        if name.startswith("enc.")
    }
    head = None
    trans = None
    if method in _TRANS_METHODS:
        cls = TransEModel if method == MethodKind.TE_TRANSE else TransRModel
        trans = cls(classes, cfg.adapter_out_dim, seed=0)
        trans.h.data[...] = arrays["trans.h"]
        if method == MethodKind.TE_TRANSR:
            for i, m in enumerate(trans.M):
                m.data[...] = arrays[f"trans.M{i}"]
    else:
        head = SoftmaxHead(classes, _pair_dim(cfg), seed=0)
        head.W.data[...] = arrays["head.W"]
        head.b.data[...] = arrays["head.b"]
    return TrainedModel(
        method=method,
        cfg=cfg,
        enc_params=enc_params,
        head=head,
        trans=trans,
        classes=classes,
        hyper=Hyper(**meta["hyper"]),
        loss_curve=list(meta["loss_curve"]),
        fingerprint=meta["fingerprint"],
    )
