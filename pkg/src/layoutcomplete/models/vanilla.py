"""Sequence decoder over the bracketed preorder token encoding.

Each step factorizes into six property heads; bracket and EOS steps are
scored on the type head only. The tree is recovered from brackets, so
no parent pointer is predicted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..layout import CLOSE, OPEN, LayoutTree, Token, linearize
from .config import ModelConfig, Vocab
from .nn import (
    HEAD_NAMES,
    EmptyBatch,
    PropIds,
    causal_mask,
    decode_stack,
    embed_tokens,
    head_logits,
    init_params,
    masked_ce,
)


@dataclass
class LossStats:
    loss: float
    scored: int
    head_accuracy: dict[str, float]
    struct_type_accuracy: float


def token_prefix_len(tokens: tuple[Token, ...], k: int) -> int:
    """Length of the token prompt covering the first k node tokens."""
    seen = 0
    for i, tok in enumerate(tokens):
        if tok not in (OPEN, CLOSE):
            seen += 1
            if seen == k:
                return i + 1
    raise ValueError(f"sequence has fewer than {k} nodes")


class VanillaModel:
    variant = "vanilla"

    def __init__(self, cfg: ModelConfig, params: dict[str, Tensor] | None = None,
                 dtype=np.float32):
        self.cfg = cfg
        self.vocab = Vocab.for_config(cfg)
        self.dtype = np.dtype(dtype)
        self.params = params if params is not None else init_params(cfg, dtype)

    # ---- batch construction -------------------------------------------------

    def _fill_token(self, ids: PropIds, b: int, s: int, tok: Token) -> None:
        if tok is OPEN:
            ids.set_special(b, s, self.vocab.open_id, self.vocab)
        elif tok is CLOSE:
            ids.set_special(b, s, self.vocab.close_id, self.vocab)
        else:
            ids.set_node(b, s, tok.type_id, tok.terminal, tok.bounds)

    def encode_batch(self, trees: list[LayoutTree], ks: list[int]):
        seqs = [linearize(t) for t in trees]
        lengths = [len(s) for s in seqs]
        b, n = len(seqs), max(lengths)
        ids = PropIds.empty(b, n, self.vocab)
        tgt = {z: np.zeros((b, n), dtype=np.int64) for z in HEAD_NAMES}
        w_c = np.zeros((b, n))
        w_prop = np.zeros((b, n))
        for i, (seq, k) in enumerate(zip(seqs, ks)):
            prompt = token_prefix_len(seq, k)
            for s, tok in enumerate(seq):
                self._fill_token(ids, i, s, tok)
                nxt = seq[s + 1] if s + 1 < len(seq) else None
                scored = 1.0 if s >= prompt - 1 else 0.0
                if nxt is None:
                    tgt["c"][i, s] = self.vocab.eos_id
                    w_c[i, s] = scored
                elif nxt is OPEN or nxt is CLOSE:
                    tgt["c"][i, s] = (self.vocab.open_id if nxt is OPEN
                                      else self.vocab.close_id)
                    w_c[i, s] = scored
                else:
                    tgt["c"][i, s] = nxt.type_id
                    tgt["t"][i, s] = int(nxt.terminal)
                    for z, val in zip(("x", "y", "xh", "yh"), nxt.bounds):
                        tgt[z][i, s] = val
                    w_c[i, s] = scored
                    w_prop[i, s] = scored
        return ids, tgt, w_c, w_prop

    # ---- forward / loss -----------------------------------------------------

    def _hidden(self, ids: PropIds) -> Tensor:
        x = embed_tokens(self.params, ids, self.dtype)
        mask = causal_mask(ids.c.shape[1], ids.pad_mask, self.dtype)
        return decode_stack(self.params, self.cfg, x, mask)[-1]

    def loss(self, trees: list[LayoutTree], ks: list[int]) -> tuple[Tensor, LossStats]:
        if not trees:
            raise EmptyBatch("no trees")
        ids, tgt, w_c, w_prop = self.encode_batch(trees, ks)
        logits = head_logits(self.params, self._hidden(ids))
        total: Tensor | None = None
        accs: dict[str, float] = {}
        for z in HEAD_NAMES:
            w = w_c if z == "c" else w_prop
            res = masked_ce(logits[z], tgt[z], w)
            total = res.nll_sum if total is None else ad.add(total, res.nll_sum)
            accs[z] = res.correct / res.count if res.count else 1.0
        n_scored = float((w_c > 0).sum())
        mean = ad.scale(total, 1.0 / max(1.0, n_scored))

        c_ok = logits["c"].data.argmax(-1) == tgt["c"]
        t_ok = logits["t"].data.argmax(-1) == tgt["t"]
        hit = c_ok & (t_ok | (w_prop == 0))
        st_acc = float(hit[w_c > 0].mean()) if n_scored else 1.0
        return mean, LossStats(mean.item(), int(n_scored), accs, st_acc)

    # ---- decode support -----------------------------------------------------

    def next_logits(self, prompts: list[list[Token]]) -> list[dict[str, np.ndarray]]:
        """Per-head logits at the last position of each token prompt."""
        b = len(prompts)
        n = max(len(p) for p in prompts)
        ids = PropIds.empty(b, n, self.vocab)
        for i, prompt in enumerate(prompts):
            for s, tok in enumerate(prompt):
                self._fill_token(ids, i, s, tok)
        h = self._hidden(ids)
        logits = head_logits(self.params, h)
        out = []
        for i, prompt in enumerate(prompts):
            last = len(prompt) - 1
            out.append({z: logits[z].data[i, last].copy() for z in HEAD_NAMES})
        return out
