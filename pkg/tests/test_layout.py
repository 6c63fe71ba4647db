from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from layoutcomplete.corpus import generate_synthetic
from layoutcomplete.layout import (
    CLOSE,
    OPEN,
    ContainmentViolation,
    EmptySequence,
    FanoutLimit,
    InvalidBounds,
    LayoutNode,
    LayoutTree,
    OrderViolation,
    SizeLimit,
    TerminalViolation,
    canonicalize,
    delinearize,
    discretize_bounds,
    extract_partial,
    linearize,
    traverse,
    validate_tree,
)

from conftest import tree


def test_validate_accepts_simple_tree():
    t = tree((0, False, (0, 0, 72, 128), None), (1, True, (0, 0, 36, 64), 0))
    assert validate_tree(t) is t


def test_validate_rejects_child_outside_parent():
    t = tree((0, False, (0, 0, 72, 128), None), (1, True, (0, 0, 80, 64), 0))
    with pytest.raises(ContainmentViolation):
        validate_tree(t)


def test_validate_rejects_out_of_screen_root():
    t = tree((0, True, (0, 0, 73, 128), None))
    with pytest.raises(ContainmentViolation):
        validate_tree(t)


def test_validate_rejects_101_node_chain():
    specs = [(0, False, (0, 0, 72, 128), None)]
    for i in range(1, 101):
        specs.append((0, i == 100, (0, 0, 72, 128), i - 1))
    with pytest.raises(SizeLimit):
        validate_tree(tree(*specs))


def test_validate_rejects_fanout_over_30():
    specs = [(0, False, (0, 0, 72, 128), None)]
    for i in range(31):
        specs.append((0, True, (i, 0, i + 1, 128), 0))
    with pytest.raises(FanoutLimit):
        validate_tree(tree(*specs))


def test_validate_rejects_child_before_parent():
    nodes = (
        LayoutNode(0, False, (0, 0, 72, 128), None, 0),
        LayoutNode(1, True, (0, 0, 36, 64), 2, 1),
        LayoutNode(2, False, (0, 0, 72, 128), 0, 1),
    )
    with pytest.raises(OrderViolation):
        validate_tree(LayoutTree(nodes))


def test_validate_rejects_bad_depth():
    nodes = (
        LayoutNode(0, False, (0, 0, 72, 128), None, 0),
        LayoutNode(1, True, (0, 0, 36, 64), 0, 2),
    )
    with pytest.raises(OrderViolation):
        validate_tree(LayoutTree(nodes))


def test_validate_rejects_terminal_with_children():
    t = tree((0, True, (0, 0, 72, 128), None), (1, True, (0, 0, 36, 64), 0))
    with pytest.raises(TerminalViolation):
        validate_tree(t)


def test_discretize_full_screen():
    assert discretize_bounds((0, 0, 1440, 2560), (1440, 2560)) == (0, 0, 72, 128)


def test_discretize_scales_linearly():
    assert discretize_bounds((720, 1280, 1440, 2560), (1440, 2560)) == (36, 64, 72, 128)


def test_discretize_widens_degenerate():
    assert discretize_bounds((10, 10, 11, 11), (1440, 2560)) == (1, 1, 2, 2)


def test_discretize_widens_at_grid_edge():
    assert discretize_bounds((1440, 0, 1440, 20), (1440, 2560)) == (71, 0, 72, 1)


def test_discretize_rejects_inverted():
    with pytest.raises(InvalidBounds):
        discretize_bounds((10, 0, 5, 10), (100, 100))


def test_discretize_rejects_outside_screen():
    with pytest.raises(InvalidBounds):
        discretize_bounds((0, 0, 101, 50), (100, 100))


def test_discretize_corners_and_monotone():
    assert discretize_bounds((0, 0, 100, 200), (100, 200)) == (0, 0, 72, 128)
    prev = 0
    for px in range(0, 101, 5):
        g = discretize_bounds((px, 0, 100, 200), (100, 200))[0]
        assert g >= prev
        prev = g


def _family_tree():
    # root -> {A, B}, A -> {C}; stored in canonical preorder
    return tree(
        (0, False, (0, 0, 72, 128), None),
        (1, False, (0, 0, 36, 128), 0),
        (3, True, (0, 0, 36, 64), 1),
        (2, True, (36, 0, 72, 128), 0),
    )


def test_traverse_single_root():
    t = tree((0, True, (0, 0, 72, 128), None))
    assert traverse(t, "dfs") == [0]
    assert traverse(t, "bfs") == [0]


def test_traverse_orders():
    t = _family_tree()
    # hand preorder walk: root, A, C, B; hand level order: root, A, B, C
    assert [t.nodes[i].type_id for i in traverse(t, "dfs")] == [0, 1, 3, 2]
    assert [t.nodes[i].type_id for i in traverse(t, "bfs")] == [0, 1, 2, 3]


def test_traverse_is_parent_first_permutation():
    for seed in range(25):
        t = generate_synthetic(seed)
        for order in ("bfs", "dfs"):
            walk = traverse(t, order)
            assert sorted(walk) == list(range(len(t.nodes)))
            pos = {idx: i for i, idx in enumerate(walk)}
            for i, n in enumerate(t.nodes):
                if n.parent is not None:
                    assert pos[n.parent] < pos[i]


def test_linearize_single_root():
    t = tree((0, True, (0, 0, 72, 128), None))
    assert linearize(t) == (t.nodes[0],)


def test_linearize_brackets_two_children():
    t = tree(
        (0, False, (0, 0, 72, 128), None),
        (1, True, (0, 0, 36, 128), 0),
        (2, True, (36, 0, 72, 128), 0),
    )
    seq = linearize(t)
    assert seq == (t.nodes[0], OPEN, t.nodes[1], t.nodes[2], CLOSE)


def test_linearize_single_child_chain_unbracketed():
    t = tree(
        (0, False, (0, 0, 72, 128), None),
        (1, False, (0, 0, 36, 128), 0),
        (2, True, (0, 0, 36, 64), 1),
    )
    assert linearize(t) == (t.nodes[0], t.nodes[1], t.nodes[2])


def test_delinearize_round_trip_examples():
    for t in (_family_tree(), tree((0, True, (0, 0, 72, 128), None))):
        assert delinearize(linearize(t), source_id=t.source_id) == t


def test_delinearize_empty_raises():
    with pytest.raises(EmptySequence):
        delinearize([])
    with pytest.raises(EmptySequence):
        delinearize([OPEN, CLOSE])


def test_delinearize_repairs_unmatched_close():
    t = _family_tree()
    seq = list(linearize(t)) + [CLOSE, CLOSE]
    assert delinearize(seq, source_id=t.source_id) == t


def test_delinearize_repairs_unclosed_open():
    t = _family_tree()
    seq = [tok for tok in linearize(t) if tok is not CLOSE]
    assert delinearize(seq, source_id=t.source_id) == t


def test_delinearize_bare_node_after_nonterminal_is_child():
    a = LayoutNode(0, False, (0, 0, 72, 128), None, 0)
    b = LayoutNode(1, True, (0, 0, 36, 64), None, 0)
    out = delinearize([a, b])
    assert out.nodes[1].parent == 0
    assert out.nodes[1].depth == 1


def test_delinearize_coerces_terminal_parent():
    a = LayoutNode(0, True, (0, 0, 72, 128), None, 0)
    b = LayoutNode(1, True, (0, 0, 36, 64), None, 0)
    out = delinearize([a, b])
    assert out.nodes[0].terminal is False
    assert out.nodes[1].parent == 0


@settings(max_examples=200, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_round_trip_property(seed):
    t = generate_synthetic(seed)
    assert delinearize(linearize(t), source_id=t.source_id) == t


def test_extract_partial_full_tree():
    t = _family_tree()
    p = extract_partial(t, 1.0, "dfs")
    assert p.k == 4
    assert [n.type_id for n in p.nodes] == [0, 1, 3, 2]


def test_extract_partial_bfs_half():
    t = _family_tree()
    p = extract_partial(t, 0.5, "bfs")
    assert p.k == 2
    assert [n.type_id for n in p.nodes] == [0, 1]
    assert p.nodes[1].parent == 0


def test_extract_partial_clamps_to_root():
    t = _family_tree()
    p = extract_partial(t, 0.05, "dfs")
    assert p.k == 1
    assert p.nodes[0].parent is None


def test_extract_partial_is_parent_closed_subset():
    for seed in range(20):
        t = generate_synthetic(seed)
        for order in ("bfs", "dfs"):
            for frac in (0.1, 0.5, 0.8):
                p = extract_partial(t, frac, order)
                assert validate_tree(p)
                keys = [(n.type_id, n.terminal, n.bounds) for n in p.nodes]
                pool = [(n.type_id, n.terminal, n.bounds) for n in t.nodes]
                for key in keys:
                    pool.remove(key)


def test_canonicalize_sorts_reading_order():
    t = tree(
        (0, False, (0, 0, 72, 128), None),
        (1, True, (36, 0, 72, 128), 0),
        (2, True, (0, 0, 36, 128), 0),
    )
    c = canonicalize(t)
    assert [n.type_id for n in c.nodes] == [0, 2, 1]
