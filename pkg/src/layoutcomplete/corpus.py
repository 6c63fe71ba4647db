"""Corpus ingestion, summary statistics, and the synthetic generator.

Layout files are one JSON document per screen:

    {"id": str, "width": int, "height": int, "root": NODE}
    NODE = {"componentLabel": str, "bounds": [x, y, x_hi, y_hi],
            "children": [NODE, ...]}

Bounds are in source-screen pixels; a node is terminal iff it has no
children. The type manifest is a text file with one category name per
line; the line number is the type id.
"""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .layout import (
    GRID_H,
    GRID_W,
    MAX_CHILDREN,
    MAX_NODES,
    LayoutNode,
    LayoutTree,
    ValidationError,
    canonicalize,
    child_table,
    discretize_bounds,
    validate_tree,
)

ROOT_LABEL = "Background Image"


class ParseError(ValueError):
    """A layout file does not match the schema."""


class EmptyCorpus(ValueError):
    """No layout survived ingestion."""


def default_manifest_path() -> Path:
    return Path(str(resources.files("layoutcomplete").joinpath("data/types.txt")))


def load_manifest(path: str | Path | None = None) -> list[str]:
    p = Path(path) if path is not None else default_manifest_path()
    names = [line.strip() for line in p.read_text().splitlines() if line.strip()]
    if len(names) != len(set(names)):
        raise ParseError(f"duplicate category names in manifest {p}")
    return names


def root_type_id(manifest: list[str]) -> int:
    try:
        return manifest.index(ROOT_LABEL)
    except ValueError:
        return 0


@dataclass(frozen=True)
class CorpusStats:
    num_layouts: int
    mean_nodes: float
    max_nodes: int
    min_nodes: int
    mean_depth: float
    max_depth: int
    min_depth: int
    type_histogram: dict[int, int]


@dataclass
class IngestResult:
    trees: list[LayoutTree]
    stats: CorpusStats
    rejected: Counter = field(default_factory=Counter)
    parse_errors: int = 0


def parse_layout(doc: dict, manifest: list[str],
                 shuffle_seed: int | None = None) -> LayoutTree:
    """Parse one layout document: map labels, discretize, store in
    canonical preorder with children in reading order.

    shuffle_seed randomizes child order instead (the spatial-ordering
    ablation); None keeps reading order.
    """
    for key in ("id", "width", "height", "root"):
        if key not in doc:
            raise ParseError(f"missing field {key!r}")
    screen = (doc["width"], doc["height"])
    type_ids = {name: i for i, name in enumerate(manifest)}
    nodes: list[LayoutNode] = []

    def parse_node(raw: dict, parent: int | None, is_root: bool) -> None:
        if "bounds" not in raw or len(raw["bounds"]) != 4:
            raise ParseError(f"bad bounds in {doc['id']!r}")
        label = raw.get("componentLabel")
        if label is None:
            if not is_root:
                raise ParseError(f"missing componentLabel in {doc['id']!r}")
            label = ROOT_LABEL if ROOT_LABEL in type_ids else manifest[0]
        if label not in type_ids:
            raise ParseError(f"unknown componentLabel {label!r}")
        try:
            bounds = discretize_bounds(tuple(raw["bounds"]), screen)
        except (ValueError, TypeError) as exc:
            raise ParseError(f"bounds in {doc['id']!r}: {exc}") from exc
        children = raw.get("children") or []
        idx = len(nodes)
        depth = 0 if parent is None else nodes[parent].depth + 1
        nodes.append(
            LayoutNode(
                type_id=type_ids[label],
                terminal=not children,
                bounds=bounds,
                parent=parent,
                depth=depth,
            )
        )
        for child in children:
            parse_node(child, idx, is_root=False)

    try:
        parse_node(doc["root"], None, is_root=True)
    except RecursionError as exc:
        raise ParseError(f"nesting too deep in {doc['id']!r}") from exc
    tree = LayoutTree(tuple(nodes), source_id=str(doc["id"]))
    if shuffle_seed is None:
        return canonicalize(tree)
    return _shuffle_children(tree, shuffle_seed)


def _shuffle_children(tree: LayoutTree, seed: int) -> LayoutTree:
    rng = random.Random(f"{seed}:{tree.source_id}")
    table = child_table(tree)
    for kids in table:
        rng.shuffle(kids)
    nodes: list[LayoutNode] = []

    def walk(old: int, parent: int | None) -> None:
        idx = len(nodes)
        depth = 0 if parent is None else nodes[parent].depth + 1
        node = tree.nodes[old]
        nodes.append(LayoutNode(node.type_id, node.terminal, node.bounds, parent, depth))
        for c in table[old]:
            walk(c, idx)

    walk(0, None)
    return LayoutTree(tuple(nodes), tree.source_id)


def compute_stats(trees: list[LayoutTree]) -> CorpusStats:
    if not trees:
        raise EmptyCorpus("no layouts")
    sizes = [len(t) for t in trees]
    depths = [max(n.depth for n in t.nodes) for t in trees]
    hist: Counter = Counter()
    for t in trees:
        hist.update(n.type_id for n in t.nodes)
    return CorpusStats(
        num_layouts=len(trees),
        mean_nodes=sum(sizes) / len(sizes),
        max_nodes=max(sizes),
        min_nodes=min(sizes),
        mean_depth=sum(depths) / len(depths),
        max_depth=max(depths),
        min_depth=min(depths),
        type_histogram=dict(sorted(hist.items())),
    )


def ingest_corpus(directory: str | Path, manifest: list[str] | None = None,
                  shuffle_seed: int | None = None) -> IngestResult:
    """Parse, discretize, and validate every *.json file in a directory.

    Files that fail to parse or validate are dropped and counted.
    Survivors are returned sorted by source_id so the result does not
    depend on filesystem enumeration order.
    """
    manifest = manifest if manifest is not None else load_manifest()
    paths = sorted(Path(directory).glob("*.json"))
    trees: list[LayoutTree] = []
    rejected: Counter = Counter()
    parse_errors = 0
    for path in paths:
        try:
            doc = json.loads(path.read_text())
            tree = parse_layout(doc, manifest, shuffle_seed=shuffle_seed)
        except (ParseError, json.JSONDecodeError):
            parse_errors += 1
            continue
        try:
            validate_tree(tree)
        except ValidationError as exc:
            rejected[type(exc).__name__] += 1
            continue
        trees.append(tree)
    if not trees:
        raise EmptyCorpus(f"no valid layouts under {directory}")
    trees.sort(key=lambda t: t.source_id)
    return IngestResult(trees, compute_stats(trees), rejected, parse_errors)


@dataclass(frozen=True)
class SyntheticParams:
    max_depth: int = 4
    max_children: int = 4
    type_count: int = 25


def generate_synthetic(seed: int, params: SyntheticParams = SyntheticParams()) -> LayoutTree:
    """Deterministic random layout for tests and demos.

    Children tile their parent along one axis without overlap, so every
    generated tree passes validate_tree. Terminal flags mark exactly the
    leaves.
    """
    if params.max_children > MAX_CHILDREN:
        raise ValueError(f"max_children > {MAX_CHILDREN}")
    rng = random.Random(seed)
    root = LayoutNode(
        type_id=min(1, params.type_count - 1),
        terminal=False,
        bounds=(0, 0, GRID_W, GRID_H),
        parent=None,
        depth=0,
    )
    nodes = [root]
    budget = MAX_NODES - 1

    def expand(idx: int) -> None:
        nonlocal budget
        node = nodes[idx]
        if node.depth >= params.max_depth - 1 or budget <= 0:
            return
        if node.depth > 0 and rng.random() > 0.75 ** node.depth:
            return
        x, y, x_hi, y_hi = node.bounds
        w, h = x_hi - x, y_hi - y
        horizontal = rng.random() < 0.5 if min(w, h) > 1 else w >= h
        span = w if horizontal else h
        n = rng.randint(1, min(params.max_children, span, budget))
        if n < 1:
            return
        lo = x if horizontal else y
        cuts = sorted(rng.sample(range(lo + 1, lo + span), n - 1))
        edges = [lo, *cuts, lo + span]
        child_idx = []
        for a, b in zip(edges, edges[1:]):
            bounds = (a, y, b, y_hi) if horizontal else (x, a, x_hi, b)
            nodes.append(
                LayoutNode(
                    type_id=rng.randrange(params.type_count),
                    terminal=True,
                    bounds=bounds,
                    parent=idx,
                    depth=node.depth + 1,
                )
            )
            child_idx.append(len(nodes) - 1)
            budget -= 1
        nodes[idx] = LayoutNode(node.type_id, False, node.bounds, node.parent, node.depth)
        for c in child_idx:
            expand(c)

    expand(0)
    # leaves keep terminal=True; expanded nodes were flipped above
    return canonicalize(LayoutTree(tuple(nodes), source_id=f"synthetic-{seed}"))


def synthetic_corpus(count: int, seed: int = 0,
                     params: SyntheticParams = SyntheticParams()) -> list[LayoutTree]:
    return [generate_synthetic(seed + i, params) for i in range(count)]


def tree_to_doc(tree: LayoutTree, manifest: list[str]) -> dict:
    """Serialize back to the layout file schema (grid units, so width=72
    and height=128 make discretization the identity)."""
    table = child_table(tree)

    def node_doc(i: int) -> dict:
        node = tree.nodes[i]
        return {
            "componentLabel": manifest[node.type_id],
            "bounds": list(node.bounds),
            "children": [node_doc(c) for c in table[i]],
        }

    return {
        "id": tree.source_id,
        "width": GRID_W,
        "height": GRID_H,
        "root": node_doc(0),
    }


def write_corpus(trees: list[LayoutTree], directory: str | Path,
                 manifest: list[str]) -> None:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    for tree in trees:
        doc = tree_to_doc(tree, manifest)
        (out / f"{tree.source_id}.json").write_text(json.dumps(doc))


def save_corpus_jsonl(trees: list[LayoutTree], path: str | Path,
                      manifest: list[str]) -> None:
    """Consolidated corpus: one layout document per line, grid units."""
    with open(path, "w") as fh:
        for tree in trees:
            fh.write(json.dumps(tree_to_doc(tree, manifest)) + "\n")


def load_corpus_jsonl(path: str | Path,
                      manifest: list[str] | None = None) -> list[LayoutTree]:
    manifest = manifest if manifest is not None else load_manifest()
    trees = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                trees.append(parse_layout(json.loads(line), manifest))
    if not trees:
        raise EmptyCorpus(f"no layouts in {path}")
    return trees
