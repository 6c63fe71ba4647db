from __future__ import annotations

from layoutcomplete.layout import LayoutNode, LayoutTree


def node(type_id=0, terminal=True, bounds=(0, 0, 72, 128), parent=None, depth=0):
    return LayoutNode(type_id, terminal, bounds, parent, depth)


def tree(*specs, source_id="t") -> LayoutTree:
    """Build a tree from (type_id, terminal, bounds, parent) tuples."""
    nodes = []
    for type_id, terminal, bounds, parent in specs:
        depth = 0 if parent is None else nodes[parent].depth + 1
        nodes.append(LayoutNode(type_id, terminal, bounds, parent, depth))
    return LayoutTree(tuple(nodes), source_id)
