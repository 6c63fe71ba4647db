"""Evaluation metrics for predicted layout trees.

Three views of quality, plus a corpus ambiguity statistic:

* tree edit distance, in seconds of designer effort. Optimal ordered
  tree edit distance (the keyroot dynamic program) with per-operation
  costs taken from a keystroke-level analysis of a typical layout
  editor: inserting means pick from palette, drag-drop, resize;
  changing a type is a context menu; changing geometry is drag plus
  resize; deleting a stray suggestion is near free.
* parent-child pair retrieval: predicted (parent, child) tuples scored
  against the ground truth as a multiset retrieval problem.
* next-element accuracy: does one greedy step reproduce the next node
  of the traversal.

Relaxed mode keeps structure and types but ignores geometry everywhere.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .layout import LayoutTree, Order, child_table, extract_partial, round_count, traverse


@dataclass(frozen=True)
class CostTable:
    insert_cost: float = 4.4  # point at palette + drag-drop + resize
    change_type_cost: float = 2.2  # right click + menu select
    change_geometry_cost: float = 3.3  # drag + resize
    delete_cost: float = 0.1  # suggestions can simply be ignored

    def __post_init__(self) -> None:
        values = (self.insert_cost, self.change_type_cost,
                  self.change_geometry_cost, self.delete_cost)
        if any(v < 0 for v in values):
            raise ValueError("costs must be non-negative")
        if self.delete_cost > min(self.insert_cost, self.change_type_cost,
                                  self.change_geometry_cost):
            raise ValueError("delete must be the cheapest operation")

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps({
            "insert": self.insert_cost,
            "change_type": self.change_type_cost,
            "change_geometry": self.change_geometry_cost,
            "delete": self.delete_cost,
        }, indent=2))

    @classmethod
    def load(cls, path: str | Path) -> "CostTable":
        doc = json.loads(Path(path).read_text())
        return cls(doc["insert"], doc["change_type"], doc["change_geometry"],
                   doc["delete"])


@dataclass(frozen=True)
class MetricReport:
    f1: float
    precision: float
    recall: float
    next_accuracy: float
    edit_distance: float
    relaxed: bool

    def __post_init__(self) -> None:
        for v in (self.f1, self.precision, self.recall, self.next_accuracy):
            if not 0 <= v <= 100:
                raise ValueError("percentages must be within [0, 100]")


# ---------------------------------------------------------------------------
# tree edit distance (ordered, optimal)
# ---------------------------------------------------------------------------


class _PostorderTree:
    """Postorder arrays for the keyroot dynamic program."""

    def __init__(self, tree: LayoutTree, relaxed: bool):
        table = child_table(tree)
        order: list[int] = []

        def walk(i: int) -> None:
            for c in table[i]:
                walk(c)
            order.append(i)

        walk(0)
        pos = {idx: p for p, idx in enumerate(order)}
        n = len(order)
        self.labels: list[tuple] = [None] * n
        self.lml = [0] * n  # leftmost leaf descendant, postorder position
        for p, idx in enumerate(order):
            node = tree.nodes[idx]
            self.labels[p] = ((node.type_id,) if relaxed
                              else (node.type_id, node.bounds))
            j = idx
            while table[j]:
                j = table[j][0]
            self.lml[p] = pos[j]
        self.keyroots = [p for p in range(n)
                         if p == n - 1 or not any(
                             self.lml[q] == self.lml[p] for q in range(p + 1, n))]
        self.n = n


def _change_cost(a: tuple, b: tuple, costs: CostTable) -> float:
    cost = 0.0
    if a[0] != b[0]:
        cost += costs.change_type_cost
    if len(a) > 1 and a[1] != b[1]:
        cost += costs.change_geometry_cost
    return cost


def tree_edit_distance(pred: LayoutTree, gold: LayoutTree, costs: CostTable,
                       relaxed: bool = False) -> float:
    """Minimal edit-script cost (seconds) transforming pred into gold.

    Deletions remove predicted nodes, insertions add missing gold
    nodes, and a change repairs type and/or geometry in place. Ordered
    trees, children in stored order.
    """
    t1 = _PostorderTree(pred, relaxed)
    t2 = _PostorderTree(gold, relaxed)
    td = [[0.0] * t2.n for _ in range(t1.n)]
    dc, ic = costs.delete_cost, costs.insert_cost

    for x in t1.keyroots:
        for y in t2.keyroots:
            l1, l2 = t1.lml[x], t2.lml[y]
            m, n = x - l1 + 2, y - l2 + 2
            fd = [[0.0] * n for _ in range(m)]
            for di in range(1, m):
                fd[di][0] = fd[di - 1][0] + dc
            for dj in range(1, n):
                fd[0][dj] = fd[0][dj - 1] + ic
            for di in range(1, m):
                i = l1 + di - 1
                for dj in range(1, n):
                    j = l2 + dj - 1
                    if t1.lml[i] == l1 and t2.lml[j] == l2:
                        fd[di][dj] = min(
                            fd[di - 1][dj] + dc,
                            fd[di][dj - 1] + ic,
                            fd[di - 1][dj - 1]
                            + _change_cost(t1.labels[i], t2.labels[j], costs),
                        )
                        td[i][j] = fd[di][dj]
                    else:
                        fd[di][dj] = min(
                            fd[di - 1][dj] + dc,
                            fd[di][dj - 1] + ic,
                            fd[t1.lml[i] - l1][t2.lml[j] - l2] + td[i][j],
                        )
    return td[t1.n - 1][t2.n - 1]


# ---------------------------------------------------------------------------
# parent-child pair retrieval
# ---------------------------------------------------------------------------


def tree_pairs(tree: LayoutTree, relaxed: bool = False) -> Counter:
    """Multiset of (parent, child) keys; identical sibling widgets are
    common, so duplicates must be matched one-to-one."""
    pairs: Counter = Counter()
    for node in tree.nodes:
        if node.parent is None:
            continue
        parent = tree.nodes[node.parent]
        if relaxed:
            key = (parent.type_id, node.type_id)
        else:
            key = (parent.type_id, *parent.bounds, node.type_id, *node.bounds)
        pairs[key] += 1
    return pairs


def pair_retrieval(pred: LayoutTree, gold: LayoutTree,
                   relaxed: bool = False) -> tuple[float, float, float]:
    """(precision, recall, f1) percentages; a side with no pairs scores
    100 on its own ratio (nothing retrieved wrongly / nothing missed)."""
    pp = tree_pairs(pred, relaxed)
    gp = tree_pairs(gold, relaxed)
    matched = sum((pp & gp).values())
    n_pred = sum(pp.values())
    n_gold = sum(gp.values())
    precision = 100.0 * matched / n_pred if n_pred else 100.0
    recall = 100.0 * matched / n_gold if n_gold else 100.0
    f1 = (2 * precision * recall / (precision + recall)
          if precision + recall > 0 else 0.0)
    return precision, recall, f1


# ---------------------------------------------------------------------------
# next-element accuracy
# ---------------------------------------------------------------------------

NextElement = "tuple[int, int, int, int, int, int] | None"
PredictFn = Callable[[LayoutTree, int, Order], "NextElement"]


def gold_next_element(tree: LayoutTree, k: int, order: Order
                      ) -> tuple[int, int, int, int, int, int] | None:
    walk = traverse(tree, order)
    if k >= len(walk):
        return None
    node = tree.nodes[walk[k]]
    return (node.type_id, int(node.terminal), *node.bounds)


def next_element_accuracy(predict: PredictFn, corpus: Sequence[LayoutTree],
                          order: Order, fractions: Iterable[float],
                          relaxed: bool = False) -> dict[float, float]:
    """Percentage of trees whose next traversal element is reproduced
    exactly (relaxed: type and terminal flag only). Trees whose prefix
    already covers the whole tree are skipped."""
    out: dict[float, float] = {}
    for fraction in fractions:
        hits = 0
        total = 0
        for tree in corpus:
            k = round_count(fraction, len(tree.nodes))
            gold = gold_next_element(tree, k, order)
            if gold is None:
                continue
            total += 1
            got = predict(tree, k, order)
            if got is None:
                continue
            if relaxed:
                hits += got[:2] == gold[:2]
            else:
                hits += tuple(got) == tuple(gold)
        out[fraction] = 100.0 * hits / total if total else 0.0
    return out


# ---------------------------------------------------------------------------
# completion ambiguity
# ---------------------------------------------------------------------------


def mean_completions(corpus: Sequence[LayoutTree], order: Order,
                     fraction: float) -> float:
    """Mean, over trees, of how many distinct full layouts share the
    tree's partial prefix."""
    groups: dict[tuple, set[tuple]] = {}
    keys = []
    for tree in corpus:
        prefix = extract_partial(tree, fraction, order).key()
        keys.append(prefix)
        groups.setdefault(prefix, set()).add(tree.key())
    if not corpus:
        raise ValueError("empty corpus")
    return sum(len(groups[k]) for k in keys) / len(keys)
