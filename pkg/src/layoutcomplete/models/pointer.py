"""Sequence decoder that predicts each node's parent by pointing.

Nodes are fed in traversal order (no bracket tokens). On top of the six
property heads, the parent of the node being generated is a softmax
over dot products between the current state and the states at the
candidate nodes' positions. Candidates are restricted to non-terminal
predecessors so decoded parents are always attachable; the unrestricted
form stays available behind mask_terminals=False.
"""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..layout import LayoutTree, Order, traverse
from .config import ModelConfig, Vocab
from .nn import (
    HEAD_NAMES,
    NEG,
    EmptyBatch,
    PropIds,
    causal_mask,
    decode_stack,
    embed_tokens,
    head_logits,
    init_params,
    masked_ce,
)
from .vanilla import LossStats


class NoCandidates(ValueError):
    """Parent pointer requested before any node precedes."""


class PointerModel:
    variant = "pointer"

    def __init__(self, cfg: ModelConfig, params: dict[str, Tensor] | None = None,
                 dtype=np.float32, mask_terminals: bool = True):
        self.cfg = cfg
        self.vocab = Vocab.for_config(cfg)
        self.dtype = np.dtype(dtype)
        self.mask_terminals = mask_terminals
        self.params = params if params is not None else init_params(cfg, dtype)

    # ---- batch construction -------------------------------------------------

    def encode_batch(self, trees: list[LayoutTree], ks: list[int], order: Order):
        walks = [traverse(t, order) for t in trees]
        b = len(trees)
        n = max(len(w) for w in walks)
        ids = PropIds.empty(b, n, self.vocab)
        tgt = {z: np.zeros((b, n), dtype=np.int64) for z in HEAD_NAMES}
        parent_tgt = np.zeros((b, n), dtype=np.int64)
        w_c = np.zeros((b, n))
        w_prop = np.zeros((b, n))
        cand = np.zeros((b, n, n))
        for i, (tree, walk, k) in enumerate(zip(trees, walks, ks)):
            pos = {node_idx: s for s, node_idx in enumerate(walk)}
            m = len(walk)
            for s, node_idx in enumerate(walk):
                node = tree.nodes[node_idx]
                ids.set_node(i, s, node.type_id, node.terminal, node.bounds)
                scored = 1.0 if s >= k - 1 else 0.0
                if s + 1 < m:
                    nxt = tree.nodes[walk[s + 1]]
                    tgt["c"][i, s] = nxt.type_id
                    tgt["t"][i, s] = int(nxt.terminal)
                    for z, val in zip(("x", "y", "xh", "yh"), nxt.bounds):
                        tgt[z][i, s] = val
                    parent_tgt[i, s] = pos[nxt.parent]
                    w_c[i, s] = scored
                    w_prop[i, s] = scored
                    for q in range(s + 1):
                        node_q = tree.nodes[walk[q]]
                        if not self.mask_terminals or not node_q.terminal:
                            cand[i, s, q] = 1.0
                else:
                    tgt["c"][i, s] = self.vocab.eos_id
                    w_c[i, s] = scored
        return ids, tgt, parent_tgt, cand, w_c, w_prop

    # ---- forward / loss -----------------------------------------------------

    def _hidden(self, ids: PropIds) -> Tensor:
        x = embed_tokens(self.params, ids, self.dtype)
        mask = causal_mask(ids.c.shape[1], ids.pad_mask, self.dtype)
        return decode_stack(self.params, self.cfg, x, mask)[-1]

    def _parent_scores(self, h: Tensor, cand: np.ndarray) -> Tensor:
        # raw dot-product alignments between the predicting state and
        # every candidate node's state
        scores = ad.matmul(h, ad.transpose(h, (0, 2, 1)))
        return ad.add(scores, ad.constant((1.0 - cand) * NEG, dtype=self.dtype))

    def loss(self, trees: list[LayoutTree], ks: list[int],
             order: Order = "dfs") -> tuple[Tensor, LossStats]:
        if not trees:
            raise EmptyBatch("no trees")
        ids, tgt, parent_tgt, cand, w_c, w_prop = self.encode_batch(trees, ks, order)
        h = self._hidden(ids)
        logits = head_logits(self.params, h)
        total: Tensor | None = None
        accs: dict[str, float] = {}
        for z in HEAD_NAMES:
            w = w_c if z == "c" else w_prop
            res = masked_ce(logits[z], tgt[z], w)
            total = res.nll_sum if total is None else ad.add(total, res.nll_sum)
            accs[z] = res.correct / res.count if res.count else 1.0
        parent_scores = self._parent_scores(h, cand)
        res = masked_ce(parent_scores, parent_tgt, w_prop)
        total = ad.add(total, res.nll_sum)
        accs["parent"] = res.correct / res.count if res.count else 1.0
        n_scored = float((w_c > 0).sum())
        mean = ad.scale(total, 1.0 / max(1.0, n_scored))

        c_ok = logits["c"].data.argmax(-1) == tgt["c"]
        t_ok = logits["t"].data.argmax(-1) == tgt["t"]
        hit = c_ok & (t_ok | (w_prop == 0))
        st_acc = float(hit[w_c > 0].mean()) if n_scored else 1.0
        return mean, LossStats(mean.item(), int(n_scored), accs, st_acc)

    # ---- decode support -----------------------------------------------------

    def next_logits(self, node_seqs: list[list], terminal_flags: list[list[bool]]
                    ) -> list[dict[str, np.ndarray]]:
        """Per-head logits plus parent log-weights after the given nodes.

        node_seqs holds LayoutNode-like property tuples already placed
        in sequence order; the parent distribution covers exactly the
        candidate positions (others are NEG).
        """
        b = len(node_seqs)
        if any(len(s) < 1 for s in node_seqs):
            raise NoCandidates("at least the root must precede")
        n = max(len(s) for s in node_seqs)
        ids = PropIds.empty(b, n, self.vocab)
        for i, seq in enumerate(node_seqs):
            for s, (type_id, terminal, bounds) in enumerate(seq):
                ids.set_node(i, s, type_id, terminal, bounds)
        h = self._hidden(ids)
        logits = head_logits(self.params, h)
        hh = h.data
        out = []
        for i, seq in enumerate(node_seqs):
            last = len(seq) - 1
            scores = hh[i, : last + 1] @ hh[i, last]
            valid = np.array(
                [not self.mask_terminals or not term
                 for term in terminal_flags[i][: last + 1]]
            )
            scores = np.where(valid, scores, NEG)
            entry = {z: logits[z].data[i, last].copy() for z in HEAD_NAMES}
            entry["parent"] = scores
            out.append(entry)
        return out
