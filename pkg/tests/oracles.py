"""Independent oracles used by tests.

The edit-distance oracle enumerates every order- and ancestry-
preserving correspondence between the two node sets (each such
correspondence is exactly one irredundant edit script: matched pairs
are changes, unmatched pred nodes deletions, unmatched gold nodes
insertions) and returns the cheapest. Exponential, fine for tiny trees,
and deliberately shares no code with the dynamic program it checks.
"""

from __future__ import annotations

from itertools import product

from layoutcomplete.layout import LayoutNode, LayoutTree, child_table
from layoutcomplete.metrics import CostTable


def _postorder(tree: LayoutTree) -> tuple[list[tuple], list[int]]:
    """(labels, ancestor bitmasks) in postorder; mask bit p set when
    postorder node p is a proper ancestor."""
    table = child_table(tree)
    order: list[int] = []

    def walk(i: int) -> None:
        for c in table[i]:
            walk(c)
        order.append(i)

    walk(0)
    pos = {idx: p for p, idx in enumerate(order)}
    labels = [(tree.nodes[idx].type_id, tree.nodes[idx].bounds) for idx in order]
    masks = [0] * len(order)
    for p, idx in enumerate(order):
        j = tree.nodes[idx].parent
        while j is not None:
            masks[p] |= 1 << pos[j]
            j = tree.nodes[j].parent
    return labels, masks


def brute_force_ted(pred: LayoutTree, gold: LayoutTree, costs: CostTable) -> float:
    l1, anc1 = _postorder(pred)
    l2, anc2 = _postorder(gold)
    n1, n2 = len(l1), len(l2)
    dc, ic = costs.delete_cost, costs.insert_cost

    def change(a: tuple, b: tuple) -> float:
        cost = 0.0
        if a[0] != b[0]:
            cost += costs.change_type_cost
        if a[1] != b[1]:
            cost += costs.change_geometry_cost
        return cost

    best = [n1 * dc + n2 * ic]

    def rec(i: int, pairs: list[tuple[int, int]], used2: int, cost: float) -> None:
        if cost >= best[0]:
            return
        if i == n1:
            total = cost + ic * (n2 - len(pairs))
            if total < best[0]:
                best[0] = total
            return
        rec(i + 1, pairs, used2, cost + dc)
        for j in range(n2):
            if used2 >> j & 1:
                continue
            ok = True
            for pi, pj in pairs:
                if pj >= j:  # postorder must be preserved (pi < i always)
                    ok = False
                    break
                if (anc1[i] >> pi & 1) != (anc2[j] >> pj & 1):
                    ok = False
                    break
                if (anc1[pi] >> i & 1) != (anc2[pj] >> j & 1):
                    ok = False
                    break
            if ok:
                pairs.append((i, j))
                rec(i + 1, pairs, used2 | 1 << j, cost + change(l1[i], l2[j]))
                pairs.pop()
    rec(0, [], 0, 0.0)
    return best[0]


def all_ordered_trees(max_nodes: int, n_labels: int) -> list[LayoutTree]:
    """Every ordered labeled tree with <= max_nodes nodes, in canonical
    preorder storage. Geometry is held fixed so labels are the types."""
    bounds = (0, 0, 72, 128)
    out: list[LayoutTree] = []

    def shapes(n: int) -> list[list[int | None]]:
        """Preorder parent vectors: parent of node i is an ancestor of
        node i-1 (or node i-1 itself)."""
        results: list[list[int | None]] = []

        def grow(parents: list[int | None]) -> None:
            if len(parents) == n:
                results.append(list(parents))
                return
            prev = len(parents) - 1
            cand = []
            j: int | None = prev
            while j is not None:
                cand.append(j)
                j = parents[j]
            for p in cand:
                parents.append(p)
                grow(parents)
                parents.pop()

        grow([None])
        return results

    for n in range(1, max_nodes + 1):
        for parents in shapes(n):
            kids = [False] * n
            for p in parents[1:]:
                kids[p] = True
            for labels in product(range(n_labels), repeat=n):
                nodes = []
                for i, p in enumerate(parents):
                    depth = 0 if p is None else nodes[p].depth + 1
                    nodes.append(LayoutNode(labels[i], not kids[i], bounds, p, depth))
                out.append(LayoutTree(tuple(nodes), f"enum-{len(out)}"))
    return out
