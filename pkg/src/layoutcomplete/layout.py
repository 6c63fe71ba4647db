"""Layout tree data model.

A layout is a rooted ordered tree of typed, axis-aligned elements on a
72x128 design grid. This module holds the node/tree types, validation,
coordinate discretization, traversals, the bracketed preorder token
encoding and its (repairing) inverse, and partial-tree extraction.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, replace
from typing import Iterable, Literal, Sequence

GRID_W = 72
GRID_H = 128
MAX_NODES = 100
MAX_CHILDREN = 30

Order = Literal["bfs", "dfs"]
Bounds = tuple[int, int, int, int]


class ValidationError(ValueError):
    """A layout tree violates a structural invariant."""


class ContainmentViolation(ValidationError):
    """Node out of screen or outside its parent."""


class SizeLimit(ValidationError):
    """More than MAX_NODES nodes."""


class FanoutLimit(ValidationError):
    """A parent has more than MAX_CHILDREN children."""


class OrderViolation(ValidationError):
    """Storage order broken: a child stored before its parent, a bad parent
    index, or an inconsistent derived depth."""


class TerminalViolation(ValidationError):
    """A node flagged terminal has children."""


class InvalidBounds(ValueError):
    """Raw bounds outside the source screen or inverted."""


class EmptySequence(ValueError):
    """Token sequence contains no nodes."""


@dataclass(frozen=True, slots=True)
class LayoutNode:
    """One UI element.

    bounds are (x, y, x_hi, y_hi) on the design grid, top-left and
    bottom-right corners. parent is the index of the parent node in the
    owning tree's storage order, or None for the root. depth is derived
    (root = 0).
    """

    type_id: int
    terminal: bool
    bounds: Bounds
    parent: int | None
    depth: int = 0

    @property
    def x(self) -> int:
        return self.bounds[0]

    @property
    def y(self) -> int:
        return self.bounds[1]

    @property
    def x_hi(self) -> int:
        return self.bounds[2]

    @property
    def y_hi(self) -> int:
        return self.bounds[3]


@dataclass(frozen=True, slots=True)
class LayoutTree:
    """A validated-shape rooted tree, nodes stored parents-first.

    Canonical storage is preorder with children in reading order; any
    parents-first order is accepted by validate_tree.
    """

    nodes: tuple[LayoutNode, ...]
    source_id: str = ""

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def root(self) -> LayoutNode:
        return self.nodes[0]

    def key(self) -> tuple:
        """Content identity ignoring source_id (grouping, dedup)."""
        return tuple(
            (n.type_id, n.terminal, n.bounds, n.parent) for n in self.nodes
        )


@dataclass(frozen=True, slots=True)
class PartialTree(LayoutTree):
    """The given portion of a design: a parent-closed subset containing
    the root, stored in the traversal order it was extracted in."""

    k: int = 0


class _Marker:
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name

    def __repr__(self) -> str:
        return self.name


OPEN = _Marker("OPEN")
CLOSE = _Marker("CLOSE")

Token = LayoutNode | _Marker
TokenSeq = tuple[Token, ...]


def child_table(tree: LayoutTree) -> list[list[int]]:
    """Children of each node, in storage order."""
    table: list[list[int]] = [[] for _ in tree.nodes]
    for i, node in enumerate(tree.nodes):
        if node.parent is not None:
            table[node.parent].append(i)
    return table


def contains(outer: Bounds, inner: Bounds) -> bool:
    return (
        outer[0] <= inner[0] < inner[2] <= outer[2]
        and outer[1] <= inner[1] < inner[3] <= outer[3]
    )


def validate_tree(tree: LayoutTree) -> LayoutTree:
    """Check every structural invariant; return the tree unchanged.

    Raises the specific ValidationError subclass for the first violated
    invariant: storage order, node/fanout limits, screen and parent
    containment, terminal consistency.
    """
    nodes = tree.nodes
    if not nodes:
        raise ValidationError("tree has no nodes")
    if nodes[0].parent is not None:
        raise OrderViolation("node 0 must be the root (parent=None)")
    if nodes[0].depth != 0:
        raise OrderViolation("root depth must be 0")
    if len(nodes) > MAX_NODES:
        raise SizeLimit(f"{len(nodes)} nodes exceeds limit of {MAX_NODES}")

    screen: Bounds = (0, 0, GRID_W, GRID_H)
    counts = [0] * len(nodes)
    for i, node in enumerate(nodes):
        if i > 0:
            p = node.parent
            if p is None:
                raise OrderViolation(f"node {i} has no parent but is not node 0")
            if not (0 <= p < i):
                raise OrderViolation(f"node {i} stored before its parent {p}")
            if node.depth != nodes[p].depth + 1:
                raise OrderViolation(
                    f"node {i} depth {node.depth} != parent depth + 1"
                )
            counts[p] += 1
            if counts[p] > MAX_CHILDREN:
                raise FanoutLimit(
                    f"node {p} has more than {MAX_CHILDREN} children"
                )
            if not contains(nodes[p].bounds, node.bounds):
                raise ContainmentViolation(
                    f"node {i} {node.bounds} outside parent {nodes[p].bounds}"
                )
        if not contains(screen, node.bounds):
            raise ContainmentViolation(f"node {i} {node.bounds} out of screen")
    for i, c in enumerate(counts):
        if c > 0 and nodes[i].terminal:
            raise TerminalViolation(f"terminal node {i} has {c} children")
    return tree


def _round_half_up(v: float) -> int:
    return math.floor(v + 0.5)


def discretize_bounds(raw: tuple[float, float, float, float],
                      screen: tuple[float, float]) -> Bounds:
    """Scale pixel bounds onto the 72x128 grid.

    Rounds half up; zero-area results are widened by one cell (shifted
    back at the grid edge) so every element keeps positive area.
    """
    x, y, x_hi, y_hi = raw
    w, h = screen
    if w <= 0 or h <= 0:
        raise InvalidBounds(f"screen {screen} must be positive")
    if not (0 <= x <= x_hi <= w) or not (0 <= y <= y_hi <= h):
        raise InvalidBounds(f"bounds {raw} outside screen {screen}")

    gx = _round_half_up(x * GRID_W / w)
    gx_hi = _round_half_up(x_hi * GRID_W / w)
    gy = _round_half_up(y * GRID_H / h)
    gy_hi = _round_half_up(y_hi * GRID_H / h)
    if gx == gx_hi:
        if gx_hi < GRID_W:
            gx_hi += 1
        else:
            gx -= 1
    if gy == gy_hi:
        if gy_hi < GRID_H:
            gy_hi += 1
        else:
            gy -= 1
    return (gx, gy, gx_hi, gy_hi)


def traverse(tree: LayoutTree, order: Order) -> list[int]:
    """Node indices in depth-first preorder or level order.

    Root first, every parent before its children, siblings in stored
    child order.
    """
    table = child_table(tree)
    if order == "dfs":
        out: list[int] = []
        stack = [0]
        while stack:
            i = stack.pop()
            out.append(i)
            stack.extend(reversed(table[i]))
        return out
    if order == "bfs":
        out = []
        queue: deque[int] = deque([0])
        while queue:
            i = queue.popleft()
            out.append(i)
            queue.extend(table[i])
        return out
    raise ValueError(f"unknown order {order!r}")


def linearize(tree: LayoutTree) -> TokenSeq:
    """Bracketed preorder token encoding.

    Children of a parent are wrapped in OPEN/CLOSE only when the parent
    has two or more children; a single child is emitted bare. The
    inverse (delinearize) recovers the tree exactly when terminal flags
    mark exactly the leaves, which holds for all ingested and synthetic
    trees.
    """
    table = child_table(tree)
    out: list[Token] = []

    def walk(i: int) -> None:
        out.append(tree.nodes[i])
        kids = table[i]
        if len(kids) >= 2:
            out.append(OPEN)
            for c in kids:
                walk(c)
            out.append(CLOSE)
        elif len(kids) == 1:
            walk(kids[0])

    walk(0)
    return tuple(out)


class TreeBuilder:
    """Incremental tree assembly from a bracket token stream.

    Shared by delinearize and the sequential decoder so both interpret
    token streams identically. Repairs malformed input instead of
    failing: unmatched CLOSE is ignored, unclosed groups are closed at
    the end, a bare node after a non-terminal becomes its child, and
    material after the root's subtree is attached under the root.
    """

    def __init__(self) -> None:
        self._nodes: list[LayoutNode] = []
        self._child_count: list[int] = []
        # frames: ("pending", idx) node awaiting its children decision;
        # ("single", idx) node whose lone child subtree is in progress;
        # ("group", parent_idx, owned) bracket group (owned = closing it
        # completes the parent's subtree).
        self._frames: list[tuple] = []

    @property
    def node_count(self) -> int:
        return len(self._nodes)

    @property
    def has_open_scope(self) -> bool:
        """True while a CLOSE token would still change parser state."""
        return bool(self._frames)

    def children_of(self, idx: int) -> int:
        return self._child_count[idx]

    def _add(self, token: LayoutNode, parent: int | None) -> int:
        depth = 0 if parent is None else self._nodes[parent].depth + 1
        idx = len(self._nodes)
        self._nodes.append(replace(token, parent=parent, depth=depth))
        self._child_count.append(0)
        if parent is not None:
            self._child_count[parent] += 1
        return idx

    def _cascade(self) -> None:
        # A completed subtree also completes any enclosing single-child
        # contexts.
        while self._frames and self._frames[-1][0] == "single":
            self._frames.pop()

    def _resolve_parent(self, frames: list[tuple]) -> int | None:
        """Attachment point for the next node, mutating `frames`.

        Returns the parent index, or None when the next node would
        become the root.
        """
        while True:
            if not frames:
                if not self._nodes:
                    return None
                frames.append(("group", 0, False))
                continue
            frame = frames[-1]
            if frame[0] == "pending":
                idx = frame[1]
                if not self._nodes[idx].terminal:
                    frames[-1] = ("single", idx)
                    return idx
                frames.pop()
                while frames and frames[-1][0] == "single":
                    frames.pop()
                continue
            return frame[1]

    def peek_parent(self) -> int | None:
        """Where the next node token would attach (no mutation)."""
        return self._resolve_parent(list(self._frames))

    def feed(self, token: Token) -> None:
        if token is OPEN:
            if not self._nodes:
                return
            if self._frames and self._frames[-1][0] == "pending":
                idx = self._frames[-1][1]
                self._frames[-1] = ("group", idx, True)
                return
            parent = self._resolve_parent(self._frames)
            self._frames.append(("group", parent if parent is not None else 0, False))
            return
        if token is CLOSE:
            if not self._nodes:
                return
            if self._frames and self._frames[-1][0] == "pending":
                self._frames.pop()
                self._cascade()
            if self._frames and self._frames[-1][0] == "group":
                _, idx, owned = self._frames.pop()
                if owned:
                    self._cascade()
            return
        parent = self._resolve_parent(self._frames)
        idx = self._add(token, parent)
        self._frames.append(("pending", idx))

    def finish(self, source_id: str = "") -> LayoutTree:
        if not self._nodes:
            raise EmptySequence("no node tokens")
        nodes = tuple(
            replace(n, terminal=False) if self._child_count[i] and n.terminal else n
            for i, n in enumerate(self._nodes)
        )
        return LayoutTree(nodes, source_id)


def delinearize(seq: Sequence[Token], source_id: str = "") -> LayoutTree:
    """Rebuild a tree from tokens; exact inverse of linearize on
    well-formed input, repairing policy otherwise (see TreeBuilder)."""
    builder = TreeBuilder()
    for token in seq:
        builder.feed(token)
    return builder.finish(source_id)


def round_count(fraction: float, total: int) -> int:
    """Given-node count for a fraction: round half up, at least 1 (the
    root is always given)."""
    return max(1, min(total, _round_half_up(fraction * total)))


def extract_partial(tree: LayoutTree, fraction: float, order: Order) -> PartialTree:
    """First k = round(fraction * n) nodes of the traversal, re-indexed.

    The result is parent-closed and contains the root by construction.
    """
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction {fraction} not in (0, 1]")
    walk = traverse(tree, order)
    k = round_count(fraction, len(tree.nodes))
    keep = walk[:k]
    remap = {old: new for new, old in enumerate(keep)}
    nodes = tuple(
        replace(
            tree.nodes[old],
            parent=None if tree.nodes[old].parent is None else remap[tree.nodes[old].parent],
        )
        for old in keep
    )
    return PartialTree(nodes, tree.source_id, k=k)


def canonicalize(tree: LayoutTree) -> LayoutTree:
    """Restore canonical form: children sorted by reading order (y, x,
    then prior order), storage in preorder. Node values are untouched."""
    table = child_table(tree)
    for i, kids in enumerate(table):
        kids.sort(key=lambda c: (tree.nodes[c].y, tree.nodes[c].x, c))

    nodes: list[LayoutNode] = []

    def walk(old: int, parent: int | None) -> None:
        idx = len(nodes)
        depth = 0 if parent is None else nodes[parent].depth + 1
        nodes.append(replace(tree.nodes[old], parent=parent, depth=depth))
        for c in table[old]:
            walk(c, idx)

    walk(0, None)
    return LayoutTree(tuple(nodes), tree.source_id)


def iter_nodes_with_children(tree: LayoutTree) -> Iterable[tuple[int, list[int]]]:
    table = child_table(tree)
    for i in range(len(tree.nodes)):
        yield i, table[i]
