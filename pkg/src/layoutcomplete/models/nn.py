"""Shared network pieces: parameters, node embedding, the causal
attention stack, output heads, and masked cross-entropy."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from .config import ModelConfig, Vocab

NEG = -1e9
HEAD_NAMES = ("c", "t", "x", "y", "xh", "yh")


class EmptyBatch(ValueError):
    """teacher-forced loss asked for zero trees."""


def _xavier(rng: np.random.Generator, fan_in: int, fan_out: int, dtype) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype)


def init_params(cfg: ModelConfig, dtype=np.float32) -> dict[str, Tensor]:
    """All trainable tensors for one decoder, keyed by checkpoint name."""
    rng = np.random.default_rng(cfg.seed)
    vocab = Vocab.for_config(cfg)
    e, h, f = cfg.embed_dim, cfg.hidden_dim, cfg.ffn_dim
    quarter = e // 4
    p: dict[str, np.ndarray] = {}

    def emb(rows: int, width: int) -> np.ndarray:
        return (rng.normal(size=(rows, width)) * 0.02).astype(dtype)

    p["emb.c"] = emb(vocab.c_rows, e)
    p["emb.t"] = emb(vocab.t_rows, e)
    p["emb.x"] = emb(vocab.x_rows, quarter)
    p["emb.y"] = emb(vocab.y_rows, quarter)
    p["emb.xh"] = emb(vocab.x_rows, quarter)
    p["emb.yh"] = emb(vocab.y_rows, quarter)

    def attn_block(prefix: str) -> None:
        for name in ("wq", "wk", "wv", "wo"):
            p[f"{prefix}.{name}"] = _xavier(rng, h, h, dtype)
        # no key bias: softmax is shift-invariant per query, so a key
        # bias is an exactly-dead parameter
        for name in ("bq", "bv", "bo"):
            p[f"{prefix}.{name}"] = np.zeros(h, dtype=dtype)

    for l in range(cfg.layers):
        attn_block(f"layer{l}.self")
        p[f"layer{l}.self_ln.g"] = np.ones(h, dtype=dtype)
        p[f"layer{l}.self_ln.b"] = np.zeros(h, dtype=dtype)
        if cfg.variant == "recursive":
            attn_block(f"layer{l}.cross")
            p[f"layer{l}.cross_ln.g"] = np.ones(h, dtype=dtype)
            p[f"layer{l}.cross_ln.b"] = np.zeros(h, dtype=dtype)
        p[f"layer{l}.ffn.w1"] = _xavier(rng, h, f, dtype)
        p[f"layer{l}.ffn.b1"] = np.zeros(f, dtype=dtype)
        p[f"layer{l}.ffn.w2"] = _xavier(rng, f, h, dtype)
        p[f"layer{l}.ffn.b2"] = np.zeros(h, dtype=dtype)
        p[f"layer{l}.ffn_ln.g"] = np.ones(h, dtype=dtype)
        p[f"layer{l}.ffn_ln.b"] = np.zeros(h, dtype=dtype)

    head_rows = {
        "c": vocab.c_classes,
        "t": 2,
        "x": vocab.x_rows,
        "y": vocab.y_rows,
        "xh": vocab.x_rows,
        "yh": vocab.y_rows,
    }
    for z, rows in head_rows.items():
        p[f"head.{z}"] = _xavier(rng, h, rows, dtype)

    return {name: ad.parameter(arr, dtype=dtype) for name, arr in p.items()}


def expected_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    return {name: t.shape for name, t in init_params(cfg).items()}


@dataclass
class PropIds:
    """Integer property ids for a padded token batch, plus masks.

    coord_mask is 1.0 for real nodes and 0.0 for OPEN/CLOSE/EOS/PAD,
    whose box embedding is defined to be zero.
    """

    c: np.ndarray
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    xh: np.ndarray
    yh: np.ndarray
    coord_mask: np.ndarray
    pad_mask: np.ndarray  # 1.0 at real positions

    @classmethod
    def empty(cls, batch: int, length: int, vocab: Vocab) -> "PropIds":
        shape = (batch, length)
        return cls(
            c=np.full(shape, vocab.pad_id, dtype=np.int64),
            t=np.full(shape, vocab.t_na, dtype=np.int64),
            x=np.zeros(shape, dtype=np.int64),
            y=np.zeros(shape, dtype=np.int64),
            xh=np.zeros(shape, dtype=np.int64),
            yh=np.zeros(shape, dtype=np.int64),
            coord_mask=np.zeros(shape, dtype=np.float64),
            pad_mask=np.zeros(shape, dtype=np.float64),
        )

    def set_node(self, b: int, s: int, type_id: int, terminal: bool,
                 bounds: tuple[int, int, int, int]) -> None:
        self.c[b, s] = type_id
        self.t[b, s] = int(terminal)
        self.x[b, s], self.y[b, s], self.xh[b, s], self.yh[b, s] = bounds
        self.coord_mask[b, s] = 1.0
        self.pad_mask[b, s] = 1.0

    def set_special(self, b: int, s: int, c_id: int, vocab: Vocab) -> None:
        self.c[b, s] = c_id
        self.t[b, s] = vocab.t_na
        self.coord_mask[b, s] = 0.0
        self.pad_mask[b, s] = 1.0


def embed_tokens(params: dict[str, Tensor], ids: PropIds, dtype) -> Tensor:
    """Combined node embedding: box concat plus type plus terminal."""
    eb = ad.concat(
        [
            ad.gather_rows(params["emb.x"], ids.x),
            ad.gather_rows(params["emb.y"], ids.y),
            ad.gather_rows(params["emb.xh"], ids.xh),
            ad.gather_rows(params["emb.yh"], ids.yh),
        ],
        axis=-1,
    )
    eb = ad.mul(eb, ad.constant(ids.coord_mask[..., None], dtype=dtype))
    ec = ad.gather_rows(params["emb.c"], ids.c)
    et = ad.gather_rows(params["emb.t"], ids.t)
    return ad.add(ad.add(eb, ec), et)


def _linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    return ad.add(ad.matmul(x, w), b)


def _split_heads(x: Tensor, heads: int) -> Tensor:
    b, s, h = x.shape
    return ad.transpose(ad.reshape(x, (b, s, heads, h // heads)), (0, 2, 1, 3))


def _merge_heads(x: Tensor) -> Tensor:
    b, nh, s, dh = x.shape
    return ad.reshape(ad.transpose(x, (0, 2, 1, 3)), (b, s, nh * dh))


def multi_head_attention(params: dict[str, Tensor], prefix: str, heads: int,
                         x_q: Tensor, x_kv: Tensor, mask: np.ndarray) -> Tensor:
    """Scaled dot-product attention; `mask` is additive, broadcastable
    to [B, heads, Sq, Sk] (0 keeps, NEG removes)."""
    q = _split_heads(_linear(x_q, params[f"{prefix}.wq"], params[f"{prefix}.bq"]), heads)
    k = _split_heads(ad.matmul(x_kv, params[f"{prefix}.wk"]), heads)
    v = _split_heads(_linear(x_kv, params[f"{prefix}.wv"], params[f"{prefix}.bv"]), heads)
    dh = q.shape[-1]
    scores = ad.scale(ad.matmul(q, ad.transpose(k, (0, 1, 3, 2))), 1.0 / math.sqrt(dh))
    scores = ad.add(scores, ad.constant(mask, dtype=x_q.dtype))
    weights = ad.softmax_rows(scores)
    out = _merge_heads(ad.matmul(weights, v))
    return _linear(out, params[f"{prefix}.wo"], params[f"{prefix}.bo"])


def causal_mask(length: int, pad_mask: np.ndarray, dtype) -> np.ndarray:
    """[B, 1, S, S]: position i sees positions <= i that are not padding."""
    tri = np.triu(np.full((length, length), NEG, dtype=dtype), k=1)
    key_pad = (1.0 - pad_mask[:, None, None, :]) * NEG
    return tri[None, None, :, :] + key_pad.astype(dtype)


def memory_mask(mem_valid: np.ndarray, dtype) -> np.ndarray:
    """[B, 1, 1, A] additive mask over cross-attention memory slots."""
    return ((1.0 - mem_valid[:, None, None, :]) * NEG).astype(dtype)


def _ffn(x: Tensor, params: dict[str, Tensor], l: int) -> Tensor:
    h = ad.relu(_linear(x, params[f"layer{l}.ffn.w1"], params[f"layer{l}.ffn.b1"]))
    return _linear(h, params[f"layer{l}.ffn.w2"], params[f"layer{l}.ffn.b2"])


def decode_stack(params: dict[str, Tensor], cfg: ModelConfig, x: Tensor,
                 self_mask: np.ndarray, memory: Tensor | None = None,
                 mem_mask: np.ndarray | None = None) -> list[Tensor]:
    """Run the layer stack; returns hidden states per layer, input first.

    `memory` adds an ancestry cross-attention sublayer between self
    attention and the feedforward (recursive variant); when None the
    sublayer is skipped entirely.
    """
    states = [x]
    for l in range(cfg.layers):
        a = multi_head_attention(params, f"layer{l}.self", cfg.heads, x, x, self_mask)
        x = ad.layer_norm(ad.add(x, a), params[f"layer{l}.self_ln.g"],
                          params[f"layer{l}.self_ln.b"])
        if memory is not None:
            c = multi_head_attention(params, f"layer{l}.cross", cfg.heads,
                                     x, memory, mem_mask)
            x = ad.layer_norm(ad.add(x, c), params[f"layer{l}.cross_ln.g"],
                              params[f"layer{l}.cross_ln.b"])
        f = _ffn(x, params, l)
        x = ad.layer_norm(ad.add(x, f), params[f"layer{l}.ffn_ln.g"],
                          params[f"layer{l}.ffn_ln.b"])
        states.append(x)
    return states


def head_logits(params: dict[str, Tensor], h: Tensor) -> dict[str, Tensor]:
    return {z: ad.matmul(h, params[f"head.{z}"]) for z in HEAD_NAMES}


@dataclass
class CEResult:
    nll_sum: Tensor  # scalar, graph-connected
    correct: int
    count: float


def masked_ce(logits: Tensor, targets: np.ndarray, weights: np.ndarray) -> CEResult:
    """Summed cross-entropy over positions with weight > 0.

    targets/weights are [B, S]; logits [B, S, V]. Also reports argmax
    accuracy (first index wins ties) over the weighted positions.
    """
    v = logits.shape[-1]
    safe = np.clip(targets, 0, v - 1)
    onehot = np.zeros(logits.shape, dtype=logits.dtype)
    b_idx, s_idx = np.nonzero(weights > 0)
    onehot[b_idx, s_idx, safe[b_idx, s_idx]] = 1.0
    logp = ad.log_softmax_rows(logits)
    picked = ad.mul(logp, ad.constant(onehot, dtype=logits.dtype))
    nll = ad.scale(ad.sum_all(picked), -1.0)
    pred = logits.data.argmax(axis=-1)
    correct = int(((pred == safe) & (weights > 0)).sum())
    return CEResult(nll, correct, float((weights > 0).sum()))
