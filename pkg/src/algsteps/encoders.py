"""Expression encoders (tree, character-GRU, character-CNN) plus the adapter.

All three map an expression or a before/after pair to a fixed-length
embedding. The tree encoder consumes the linearized token sequence, adding a
learned path embedding to each symbol embedding before a gated recurrent
pass; the character encoders consume the printed concatenation of the pair
around a reserved separator. Symbol embeddings are sums of character
embeddings, so the vocabulary stays closed over all printable number
literals.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .expr import linearize, print_expr
from .tensor import (
    ShapeMismatch,
    Tensor,
    add,
    concat,
    conv2d,
    embedding_lookup,
    matmul,
    maxpool1d,
    mul,
    narrow,
    relu,
    sigmoid,
    stack,
    sub,
    tanh,
)

PAD = " "
SEPARATOR = "|"


class UnknownSymbol(Exception):
    """A character outside the encoder vocabulary."""

    def __init__(self, symbol):
        super().__init__(f"symbol {symbol!r} is not in the encoder vocabulary")
        self.symbol = symbol


def build_vocab():
    """The pinned character vocabulary: pad, digits, dot, letters, operators."""
    chars = [PAD]
    chars += [str(d) for d in range(10)]
    chars += ["."]
    chars += [chr(c) for c in range(ord("a"), ord("z") + 1)]
    chars += list("+-*/^=()~")
    chars += [SEPARATOR]
    return {c: i for i, c in enumerate(chars)}


class EncoderKind(Enum):
    TREE = "TREE"
    GRU = "GRU"
    CNN = "CNN"


@dataclass
class EncoderConfig:
    """Dimensions and vocabulary shared by the encoders and the adapter."""

    kind: EncoderKind
    symbol_embed_dim: int = 32
    hidden_dim: int = 512
    adapter_hidden: int = 128
    adapter_out_dim: int = 32
    max_depth: int = 16
    cnn_widths: tuple = (3, 4, 5)
    cnn_filters: int = 64
    vocab: dict = field(default_factory=build_vocab)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)


@dataclass
class Embedding:
    """A fixed-length embedding vector with its provenance."""

    vector: np.ndarray
    provenance: str  # "pre_adapter" (length D_enc) or "post_adapter" (length D)
    pad_applied: bool = False


def init_encoder_params(cfg, seed=0):
    """Fresh named parameters for the configured encoder plus the adapter."""
    rng = np.random.default_rng(seed)
    v = len(cfg.vocab)
    m = cfg.symbol_embed_dim
    h = cfg.hidden_dim

    def table(shape, scale):
        return rng.normal(0.0, scale, size=shape)

    params = {}
    params["embed.sym"] = table((v, m), 0.1)
    if cfg.kind == EncoderKind.TREE:
        params["embed.path"] = table((2 * cfg.max_depth, m), 0.1)
    if cfg.kind in (EncoderKind.TREE, EncoderKind.GRU):
        params["gru.Wx"] = table((m, 3 * h), 1.0 / np.sqrt(m))
        params["gru.Wh"] = table((h, 3 * h), 1.0 / np.sqrt(h))
        params["gru.b"] = np.zeros(3 * h)
    if cfg.kind == EncoderKind.CNN:
        for w in cfg.cnn_widths:
            params[f"cnn.k{w}"] = table((cfg.cnn_filters, w, m), 1.0 / np.sqrt(w * m))
            params[f"cnn.b{w}"] = np.zeros(cfg.cnn_filters)
        pooled = cfg.cnn_filters * len(cfg.cnn_widths)
        params["cnn.proj"] = table((pooled, h), 1.0 / np.sqrt(pooled))
        params["cnn.proj_b"] = np.zeros(h)
    params["adapt.W1"] = table((h, cfg.adapter_hidden), 1.0 / np.sqrt(h))
    params["adapt.b1"] = np.zeros(cfg.adapter_hidden)
    params["adapt.W2"] = table((cfg.adapter_hidden, cfg.adapter_out_dim),
                               1.0 / np.sqrt(cfg.adapter_hidden))
    params["adapt.b2"] = np.zeros(cfg.adapter_out_dim)
    return {name: Tensor(arr, requires_grad=True, name=name)
            for name, arr in params.items()}


# ------------------------------------------------------------ recurrent core


def gru_scan(xs, params, mask=None):
    """Run the gated recurrent cell over a token sequence.

    xs is a list of (B, M) tensors, one per step; mask, when given, is a list
    of (B, 1) tensors where 0 freezes the hidden state past a sequence's end.
    Returns the list of hidden states, one per input step.
    """
    wx, wh, b = params["gru.Wx"], params["gru.Wh"], params["gru.b"]
    h_dim = wh.shape[0]
    batch = xs[0].shape[0]
    h = Tensor(np.zeros((batch, h_dim)))
    states = []
    for t, x in enumerate(xs):
        xa = add(matmul(x, wx), b)
        ha = matmul(h, wh)
        z = sigmoid(add(narrow(xa, 1, 0, h_dim), narrow(ha, 1, 0, h_dim)))
        r = sigmoid(add(narrow(xa, 1, h_dim, h_dim), narrow(ha, 1, h_dim, h_dim)))
        n = tanh(add(narrow(xa, 1, 2 * h_dim, h_dim),
                     mul(r, narrow(ha, 1, 2 * h_dim, h_dim))))
        h_new = add(mul(sub(1.0, z), n), mul(z, h))
        if mask is not None:
            keep = mask[t]
            h_new = add(mul(keep, h_new), mul(sub(1.0, keep), h))
        h = h_new
        states.append(h)
    return states


# ------------------------------------------------------------ tree encoder


def _tree_rows(e, cfg):
    """COO rows of the (token, feature) count matrix for one expression."""
    cached = cfg._cache.get(e)
    if cached is not None:
        return cached
    tokens = linearize(e, max_depth=cfg.max_depth)
    v = len(cfg.vocab)
    counts = {}
    for t, tok in enumerate(tokens):
        for ch in tok.symbol:
            col = cfg.vocab.get(ch)
            if col is None:
                raise UnknownSymbol(ch)
            counts[(t, col)] = counts.get((t, col), 0) + 1
        for level, child in enumerate(tok.path):
            key = (t, v + 2 * level + child)
            counts[key] = counts.get(key, 0) + 1
    rows = np.array([k[0] for k in counts], dtype=np.int64)
    cols = np.array([k[1] for k in counts], dtype=np.int64)
    vals = np.array(list(counts.values()), dtype=np.float64)
    entry = (rows, cols, vals, len(tokens))
    cfg._cache[e] = entry
    return entry


def encode_tree_batch(exprs, cfg, params):
    """Embed a batch of expressions; returns a (B, hidden_dim) tensor."""
    entries = [_tree_rows(e, cfg) for e in exprs]
    lengths = np.array([entry[3] for entry in entries])
    t_max = int(lengths.max())
    batch = len(exprs)
    n_features = len(cfg.vocab) + 2 * cfg.max_depth
    dense = np.zeros((t_max, batch, n_features))
    for b, (rows, cols, vals, _) in enumerate(entries):
        dense[rows, b, cols] = vals
    w_comb = concat([params["embed.sym"], params["embed.path"]], axis=0)
    xs = [matmul(Tensor(dense[t]), w_comb) for t in range(t_max)]
    masks = [Tensor((lengths > t).astype(np.float64).reshape(batch, 1))
             for t in range(t_max)]
    return gru_scan(xs, params, mask=masks)[-1]


def encode_tree(e, cfg, params):
    """Embed one expression tree; returns a pre-adapter Embedding."""
    out = encode_tree_batch([e], cfg, params)
    return Embedding(out.data[0].copy(), "pre_adapter")


# ------------------------------------------------------------ char encoders


def char_indices(e1, e2, cfg):
    """Vocabulary indices of print(e1) + separator + print(e2)."""
    joined = print_expr(e1) + SEPARATOR + print_expr(e2)
    out = []
    for ch in joined:
        idx = cfg.vocab.get(ch)
        if idx is None:
            raise UnknownSymbol(ch)
        out.append(idx)
    return out


def encode_chars_batch(pairs, cfg, params):
    """Embed printed before/after pairs; returns a (B, hidden_dim) tensor."""
    seqs = [char_indices(e1, e2, cfg) for e1, e2 in pairs]
    if cfg.kind == EncoderKind.GRU:
        lengths = np.array([len(s) for s in seqs])
        t_max = int(lengths.max())
        batch = len(seqs)
        idx = np.zeros((batch, t_max), dtype=np.int64)
        for b, s in enumerate(seqs):
            idx[b, : len(s)] = s
        xs = [embedding_lookup(params["embed.sym"], idx[:, t]) for t in range(t_max)]
        masks = [Tensor((lengths > t).astype(np.float64).reshape(batch, 1))
                 for t in range(t_max)]
        return gru_scan(xs, params, mask=masks)[-1]
    if cfg.kind == EncoderKind.CNN:
        wmax = max(cfg.cnn_widths)
        rows = []
        for s in seqs:
            if len(s) < wmax:
                s = s + [cfg.vocab[PAD]] * (wmax - len(s))
            x = embedding_lookup(params["embed.sym"], s)
            parts = [
                maxpool1d(conv2d(x, params[f"cnn.k{w}"], params[f"cnn.b{w}"]))
                for w in cfg.cnn_widths
            ]
            rows.append(concat(parts, axis=0))
        pooled = stack(rows, axis=0)
        return add(matmul(pooled, params["cnn.proj"]), params["cnn.proj_b"])
    raise ValueError(f"encode_chars_batch: encoder kind {cfg.kind} is not character-based")


def encode_chars(pair, cfg, params):
    """Embed one printed pair; returns a pre-adapter Embedding."""
    e1, e2 = _as_pair(pair)
    seq = char_indices(e1, e2, cfg)
    padded = cfg.kind == EncoderKind.CNN and len(seq) < max(cfg.cnn_widths)
    out = encode_chars_batch([(e1, e2)], cfg, params)
    return Embedding(out.data[0].copy(), "pre_adapter", pad_applied=padded)


# ------------------------------------------------------------ adapter & pairs


def adapt_batch(m, cfg, params):
    """Two-layer adapter hidden_dim -> adapter_hidden -> adapter_out_dim."""
    hidden = relu(add(matmul(m, params["adapt.W1"]), params["adapt.b1"]))
    return add(matmul(hidden, params["adapt.W2"]), params["adapt.b2"])


def adapt(m, cfg, params):
    """Adapt one pre-adapter embedding down to the model dimension."""
    vec = m.vector if isinstance(m, Embedding) else np.asarray(m, dtype=np.float64)
    if vec.shape != (cfg.hidden_dim,):
        raise ShapeMismatch(
            f"adapt: input shape {vec.shape} vs expected ({cfg.hidden_dim},)"
        )
    out = adapt_batch(Tensor(vec[None, :]), cfg, params)
    return Embedding(out.data[0].copy(), "post_adapter")


def _as_pair(x):
    if isinstance(x, (tuple, list)):
        e1, e2 = x
        return e1, e2
    return x.before, x.after


def encode_pair_batch(pairs, cfg, params):
    """Pair embeddings for classification: (B, 2D) for TREE, (B, D) otherwise."""
    pairs = [_as_pair(p) for p in pairs]
    if cfg.kind == EncoderKind.TREE:
        e1 = adapt_batch(encode_tree_batch([p[0] for p in pairs], cfg, params),
                         cfg, params)
        e2 = adapt_batch(encode_tree_batch([p[1] for p in pairs], cfg, params),
                         cfg, params)
        return concat([e1, e2], axis=-1)
    return adapt_batch(encode_chars_batch(pairs, cfg, params), cfg, params)


def encode_pair(pair, cfg, params):
    """Pair embedding for one step; returns a plain vector."""
    out = encode_pair_batch([_as_pair(pair)], cfg, params)
    return out.data[0].copy()
