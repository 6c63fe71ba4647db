"""Top-down decoder applied once per parent.

One shared stack decodes the children of each parent: the local
sequence is [parent, child_1, ..., child_s], self-attention is causal
over that sequence, and every layer also cross-attends to the final
hidden states of the ancestry (root..parent), computed by earlier
passes. The state the root contributes is bootstrapped by running the
stack on the one-token sequence [root] with cross-attention skipped.
Sibling lists terminate through a dedicated EOS class on the type head.

Decoding many trees at once batches naturally (a forest): passes at the
same depth share their ancestry length, so levels batch with sequence
padding only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..layout import LayoutNode, LayoutTree, Order, child_table, traverse
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
    memory_mask,
)
from .vanilla import LossStats


class MissingAncestry(ValueError):
    """An ancestor's hidden state was not computed before its
    descendants were decoded."""


@dataclass
class Pass:
    tree_idx: int
    parent: int
    children: list[int]
    ancestry: list[int]  # node indices root..parent inclusive


@dataclass
class LevelOut:
    passes: list[Pass]
    logits: dict[str, Tensor]
    tgt: dict[str, np.ndarray]
    w_c: np.ndarray
    w_prop: np.ndarray
    hidden: Tensor
    seq_len: int


def build_passes(tree: LayoutTree, tree_idx: int = 0) -> list[Pass]:
    """One pass per non-terminal node, in storage order (parents first)."""
    table = child_table(tree)
    passes = []
    for i, node in enumerate(tree.nodes):
        if node.terminal:
            continue
        ancestry = []
        j: int | None = i
        while j is not None:
            ancestry.append(j)
            j = tree.nodes[j].parent
        passes.append(Pass(tree_idx, i, table[i], ancestry[::-1]))
    return passes


class RecursiveModel:
    variant = "recursive"

    def __init__(self, cfg: ModelConfig, params: dict[str, Tensor] | None = None,
                 dtype=np.float32):
        self.cfg = cfg
        self.vocab = Vocab.for_config(cfg)
        self.dtype = np.dtype(dtype)
        self.params = params if params is not None else init_params(cfg, dtype)

    # ---- forest forward ------------------------------------------------------

    def _embed_nodes(self, rows: list[list[LayoutNode]]) -> tuple[PropIds, Tensor]:
        b = len(rows)
        n = max(len(r) for r in rows)
        ids = PropIds.empty(b, n, self.vocab)
        for i, row in enumerate(rows):
            for s, node in enumerate(row):
                ids.set_node(i, s, node.type_id, node.terminal, node.bounds)
        return ids, embed_tokens(self.params, ids, self.dtype)

    def forward_forest(self, trees: list[LayoutTree]) -> list[LevelOut]:
        """Run bootstrap plus one batched pass-level per depth.

        Hidden states flow between levels through a growing state table
        (row 0 is a zero pad row), so gradients reach ancestor passes.
        """
        all_passes = [p for i, t in enumerate(trees) for p in build_passes(t, i)]
        by_depth: dict[int, list[Pass]] = {}
        for p in all_passes:
            by_depth.setdefault(len(p.ancestry) - 1, []).append(p)

        state_id: dict[tuple[int, int], int] = {}
        blocks: list[Tensor] = [ad.constant(np.zeros((1, self.cfg.hidden_dim)),
                                            dtype=self.dtype)]
        next_id = 1

        # bootstrap: every root alone, no ancestry memory
        ids, x = self._embed_nodes([[t.nodes[0]] for t in trees])
        mask = causal_mask(1, ids.pad_mask, self.dtype)
        boot = decode_stack(self.params, self.cfg, x, mask)[-1]
        blocks.append(ad.reshape(boot, (len(trees), self.cfg.hidden_dim)))
        for i in range(len(trees)):
            state_id[(i, 0)] = next_id + i
        next_id += len(trees)

        levels: list[LevelOut] = []
        for depth in sorted(by_depth):
            passes = by_depth[depth]
            b = len(passes)
            seq_len = 1 + max(len(p.children) for p in passes)
            rows = [[trees[p.tree_idx].nodes[j] for j in (p.parent, *p.children)]
                    for p in passes]
            ids = PropIds.empty(b, seq_len, self.vocab)
            for i, row in enumerate(rows):
                for s, node in enumerate(row):
                    ids.set_node(i, s, node.type_id, node.terminal, node.bounds)

            mem_len = depth + 1
            mem_ids = np.zeros((b, mem_len), dtype=np.int64)
            for i, p in enumerate(passes):
                for a, node_idx in enumerate(p.ancestry):
                    key = (p.tree_idx, node_idx)
                    if key not in state_id:
                        raise MissingAncestry(f"no state for node {node_idx}")
                    mem_ids[i, a] = state_id[key]

            table = blocks[0] if len(blocks) == 1 else ad.concat(blocks, axis=0)
            memory = ad.gather_rows(table, mem_ids)
            mem_mask = memory_mask(np.ones((b, mem_len)), self.dtype)
            x = embed_tokens(self.params, ids, self.dtype)
            mask = causal_mask(seq_len, ids.pad_mask, self.dtype)
            h = decode_stack(self.params, self.cfg, x, mask, memory, mem_mask)[-1]

            blocks.append(ad.reshape(h, (b * seq_len, self.cfg.hidden_dim)))
            for i, p in enumerate(passes):
                for r, child in enumerate(p.children):
                    state_id[(p.tree_idx, child)] = next_id + i * seq_len + (r + 1)
            next_id += b * seq_len

            tgt = {z: np.zeros((b, seq_len), dtype=np.int64) for z in HEAD_NAMES}
            w_c = np.zeros((b, seq_len))
            w_prop = np.zeros((b, seq_len))
            for i, p in enumerate(passes):
                tree = trees[p.tree_idx]
                for r in range(len(p.children) + 1):
                    if r < len(p.children):
                        child = tree.nodes[p.children[r]]
                        tgt["c"][i, r] = child.type_id
                        tgt["t"][i, r] = int(child.terminal)
                        for z, val in zip(("x", "y", "xh", "yh"), child.bounds):
                            tgt[z][i, r] = val
                        w_c[i, r] = 1.0
                        w_prop[i, r] = 1.0
                    else:
                        tgt["c"][i, r] = self.vocab.eos_id
                        w_c[i, r] = 1.0
            levels.append(LevelOut(passes, head_logits(self.params, h),
                                   tgt, w_c, w_prop, h, seq_len))
        return levels

    # ---- loss ----------------------------------------------------------------

    def loss(self, trees: list[LayoutTree], ks: list[int],
             order: Order = "bfs") -> tuple[Tensor, LossStats]:
        if not trees:
            raise EmptyBatch("no trees")
        given = [set(traverse(t, order)[:k]) for t, k in zip(trees, ks)]
        levels = self.forward_forest(trees)
        total: Tensor | None = None
        n_scored = 0.0
        correct = {z: 0 for z in HEAD_NAMES}
        counts = {z: 0.0 for z in HEAD_NAMES}
        st_hits = 0.0
        for level in levels:
            w_c = level.w_c.copy()
            w_prop = level.w_prop.copy()
            for i, p in enumerate(level.passes):
                for r, child in enumerate(p.children):
                    if child in given[p.tree_idx]:
                        w_c[i, r] = 0.0
                        w_prop[i, r] = 0.0
            for z in HEAD_NAMES:
                w = w_c if z == "c" else w_prop
                res = masked_ce(level.logits[z], level.tgt[z], w)
                total = res.nll_sum if total is None else ad.add(total, res.nll_sum)
                correct[z] += res.correct
                counts[z] += res.count
            n_scored += float((w_c > 0).sum())
            c_ok = level.logits["c"].data.argmax(-1) == level.tgt["c"]
            t_ok = level.logits["t"].data.argmax(-1) == level.tgt["t"]
            st_hits += float((c_ok & (t_ok | (w_prop == 0)))[w_c > 0].sum())
        if total is None:
            total = ad.constant(np.zeros(()), dtype=self.dtype)
        mean = ad.scale(total, 1.0 / max(1.0, n_scored))
        accs = {z: (correct[z] / counts[z] if counts[z] else 1.0) for z in HEAD_NAMES}
        st_acc = st_hits / n_scored if n_scored else 1.0
        return mean, LossStats(mean.item(), int(n_scored), accs, st_acc)

    # ---- single-pass helpers (decoding, next-element) -------------------------

    def bootstrap_state(self, root: LayoutNode) -> np.ndarray:
        ids, x = self._embed_nodes([[root]])
        mask = causal_mask(1, ids.pad_mask, self.dtype)
        h = decode_stack(self.params, self.cfg, x, mask)[-1]
        return h.data[0, 0].copy()

    def run_pass(self, parent: LayoutNode, siblings: list[LayoutNode],
                 ancestry_states: np.ndarray
                 ) -> tuple[dict[str, np.ndarray], np.ndarray]:
        """One local sequence [parent, *siblings] against fixed ancestry.

        Returns per-position head logits ([S, V] arrays; position r
        predicts child r, the final position predicts the next sibling
        or EOS) and the per-position final hidden states [S, H].
        """
        if ancestry_states.ndim != 2 or ancestry_states.shape[0] < 1:
            raise MissingAncestry("ancestry states required (root at least)")
        row = [parent, *siblings]
        ids, x = self._embed_nodes([row])
        mask = causal_mask(len(row), ids.pad_mask, self.dtype)
        memory = ad.constant(ancestry_states[None, :, :], dtype=self.dtype)
        mem_mask = memory_mask(np.ones((1, ancestry_states.shape[0])), self.dtype)
        h = decode_stack(self.params, self.cfg, x, mask, memory, mem_mask)[-1]
        logits = head_logits(self.params, h)
        return ({z: logits[z].data[0].copy() for z in HEAD_NAMES},
                h.data[0].copy())
