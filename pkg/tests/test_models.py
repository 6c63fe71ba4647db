from __future__ import annotations

import math

import numpy as np
import pytest

from layoutcomplete import autodiff as ad
from layoutcomplete.corpus import generate_synthetic
from layoutcomplete.layout import LayoutNode, LayoutTree, linearize, traverse
from layoutcomplete.models import (
    ModelConfig,
    PointerModel,
    RecursiveModel,
    VanillaModel,
    Vocab,
    build_model,
    load_model,
    save_model,
)
from layoutcomplete.models.nn import PropIds, embed_tokens, init_params, masked_ce
from layoutcomplete.models.recursive import build_passes
from layoutcomplete.models.vanilla import token_prefix_len

from conftest import tree

SMALL = dict(embed_dim=32, hidden_dim=32, layers=2, heads=4, ffn_dim=64, seed=0)


def small_cfg(variant):
    return ModelConfig(variant=variant, **SMALL)


def family():
    return tree(
        (0, False, (0, 0, 72, 128), None),
        (1, False, (0, 0, 36, 128), 0),
        (3, True, (0, 0, 36, 64), 1),
        (2, True, (36, 0, 72, 128), 0),
    )


def test_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(variant="vanilla", embed_dim=30, hidden_dim=30)
    with pytest.raises(ValueError):
        ModelConfig(variant="vanilla", embed_dim=32, hidden_dim=64)
    with pytest.raises(ValueError):
        ModelConfig(variant="nope")


def test_config_file_round_trip(tmp_path):
    cfg = small_cfg("pointer")
    cfg.save(tmp_path / "m.json")
    assert ModelConfig.load(tmp_path / "m.json") == cfg


def test_head_widths():
    cfg = small_cfg("vanilla")
    params = init_params(cfg)
    assert params["head.c"].shape == (32, 28)  # 25 types + open/close/eos
    assert params["head.t"].shape == (32, 2)
    assert params["head.x"].shape == (32, 73)
    assert params["head.xh"].shape == (32, 73)
    assert params["head.y"].shape == (32, 129)
    assert params["head.yh"].shape == (32, 129)


def test_embed_identical_nodes_identical():
    cfg = small_cfg("vanilla")
    params = init_params(cfg)
    vocab = Vocab.for_config(cfg)
    ids = PropIds.empty(1, 2, vocab)
    ids.set_node(0, 0, 3, True, (1, 2, 3, 4))
    ids.set_node(0, 1, 3, True, (1, 2, 3, 4))
    out = embed_tokens(params, ids, np.float32).data
    np.testing.assert_array_equal(out[0, 0], out[0, 1])


def test_embed_coordinate_block_order():
    cfg = small_cfg("vanilla")
    vocab = Vocab.for_config(cfg)
    params = init_params(cfg)
    quarter = cfg.embed_dim // 4
    ids = PropIds.empty(1, 1, vocab)
    ids.set_node(0, 0, 0, True, (5, 6, 7, 8))
    base = embed_tokens(params, ids, np.float32).data[0, 0]
    # bumping the x table row must only move the first quarter, and so on
    for block, (name, r) in enumerate(
            (("emb.x", 5), ("emb.y", 6), ("emb.xh", 7), ("emb.yh", 8))):
        params2 = init_params(cfg)
        params2[name].data = params2[name].data.copy()
        params2[name].data[r] += 1.0
        out = embed_tokens(params2, ids, np.float32).data[0, 0]
        delta = out - base
        lo, hi = block * quarter, (block + 1) * quarter
        assert np.all(delta[lo:hi] != 0)
        mask = np.ones(cfg.embed_dim, bool)
        mask[lo:hi] = False
        np.testing.assert_array_equal(delta[mask], 0)


def test_embed_zero_tables_zero_vector():
    cfg = small_cfg("vanilla")
    vocab = Vocab.for_config(cfg)
    params = {k: ad.parameter(np.zeros_like(v.data)) for k, v in init_params(cfg).items()}
    ids = PropIds.empty(1, 1, vocab)
    ids.set_node(0, 0, 1, False, (0, 0, 10, 10))
    np.testing.assert_array_equal(embed_tokens(params, ids, np.float32).data, 0.0)


def test_specials_carry_zero_box_embedding():
    cfg = small_cfg("vanilla")
    vocab = Vocab.for_config(cfg)
    params = init_params(cfg)
    # zero the type/terminal tables: what remains is the box part
    params["emb.c"].data = np.zeros_like(params["emb.c"].data)
    params["emb.t"].data = np.zeros_like(params["emb.t"].data)
    ids = PropIds.empty(1, 1, vocab)
    ids.set_special(0, 0, vocab.open_id, vocab)
    np.testing.assert_array_equal(embed_tokens(params, ids, np.float32).data, 0.0)


def test_causal_perturb_later_position_bitwise_invariant():
    cfg = small_cfg("vanilla")
    m = VanillaModel(cfg)
    toks = list(linearize(generate_synthetic(0)))[:9]

    def hidden(tokens, mutate=False):
        ids = PropIds.empty(1, len(tokens), m.vocab)
        for s, tok in enumerate(tokens):
            m._fill_token(ids, 0, s, tok)
        if mutate:
            ids.c[0, 7] = (ids.c[0, 7] + 1) % m.cfg.type_count
            ids.x[0, 8] = (ids.x[0, 8] + 5) % 72
        return m._hidden(ids).data

    np.testing.assert_array_equal(hidden(toks)[0, :7], hidden(toks, True)[0, :7])


def test_causal_append_preserves_prefix():
    # across lengths BLAS may reorder summation, so this is close, not
    # bitwise; the fixed-length perturbation test above is the bitwise one
    cfg = small_cfg("vanilla")
    m = VanillaModel(cfg)
    toks = list(linearize(generate_synthetic(0)))

    def hidden(tokens):
        ids = PropIds.empty(1, len(tokens), m.vocab)
        for s, tok in enumerate(tokens):
            m._fill_token(ids, 0, s, tok)
        return m._hidden(ids).data

    np.testing.assert_allclose(hidden(toks[:5])[0], hidden(toks[:9])[0, :5],
                               atol=1e-5)


def test_scored_logits_ignore_future_targets():
    cfg = small_cfg("pointer")
    m = PointerModel(cfg)
    t = family()
    ids, tgt, ptgt, cand, w_c, w_prop = m.encode_batch([t], [1], "dfs")
    h1 = m._hidden(ids).data
    mutated = family()
    nodes = list(mutated.nodes)
    nodes[3] = LayoutNode(7, True, (40, 4, 70, 100), 0, 1)
    mutated = LayoutTree(tuple(nodes))
    ids2, *_ = m.encode_batch([mutated], [1], "dfs")
    h2 = m._hidden(ids2).data
    # dfs order puts the mutated node last; every earlier state is untouched
    np.testing.assert_array_equal(h1[0, :3], h2[0, :3])


def test_vanilla_uniform_logits_loss_closed_form():
    cfg = small_cfg("vanilla")
    zero = {k: ad.parameter(np.zeros_like(v.data))
            for k, v in init_params(cfg).items()}
    m = VanillaModel(cfg, params=zero)
    t = family()
    loss, stats = m.loss([t], [1])
    toks = linearize(t)
    n_steps = len(toks)  # predictions for positions 1..m-1 plus EOS
    n_node_targets = sum(1 for tok in toks[1:] if isinstance(tok, LayoutNode))
    per_node = (math.log(28) + math.log(2) + 2 * math.log(73) + 2 * math.log(129))
    expect = (n_node_targets * per_node + (n_steps - n_node_targets) * math.log(28))
    expect /= n_steps
    assert stats.loss == pytest.approx(expect, rel=1e-5)


def test_masked_ce_one_hot_favoring_is_near_zero():
    logits = ad.constant(np.full((1, 3, 28), 0.0, dtype=np.float64))
    data = logits.data.copy()
    targets = np.array([[1, 5, 27]])
    for s in range(3):
        data[0, s, targets[0, s]] = 50.0
    res = masked_ce(ad.constant(data), targets, np.ones((1, 3)))
    assert float(res.nll_sum.data) / 3 < 1e-8
    assert res.correct == 3


def test_loss_padding_invariance_via_batching():
    cfg = small_cfg("vanilla")
    m = VanillaModel(cfg)
    small, large = generate_synthetic(2), generate_synthetic(0)
    assert len(small) != len(large)
    l1, s1 = m.loss([small], [1])
    l2, s2 = m.loss([large], [1])
    lb, sb = m.loss([small, large], [1, 1])
    merged = (s1.loss * s1.scored + s2.loss * s2.scored) / (s1.scored + s2.scored)
    assert sb.loss == pytest.approx(merged, rel=1e-5)
    assert sb.scored == s1.scored + s2.scored


def test_pointer_parent_single_candidate():
    cfg = small_cfg("pointer")
    m = PointerModel(cfg)
    seq = [(0, False, (0, 0, 72, 128))]
    out = m.next_logits([seq], [[False]])[0]
    assert out["parent"].shape == (1,)
    p = np.exp(out["parent"] - out["parent"].max())
    assert (p / p.sum())[0] == pytest.approx(1.0)


def test_pointer_identical_states_uniform():
    cfg = small_cfg("pointer")
    m = PointerModel(cfg)
    h = ad.constant(np.tile(np.linspace(0.1, 1.0, 32), (1, 4, 1)).astype(np.float32))
    cand = np.ones((1, 4, 4))
    cand[:, :, :] = np.tril(np.ones((4, 4)))
    scores = m._parent_scores(h, cand).data
    row = scores[0, 3]
    p = np.exp(row - row.max())
    p = p / p.sum()
    np.testing.assert_allclose(p, 0.25, atol=1e-6)


def test_pointer_candidate_count_before_masking():
    cfg = small_cfg("pointer")
    m = PointerModel(cfg, mask_terminals=False)
    t = family()
    _, _, _, cand, _, w_prop = m.encode_batch([t], [1], "dfs")
    walk = traverse(t, "dfs")
    m_len = len(walk)
    for s in range(m_len - 1):  # step s predicts node s+2 (1-based i = s+2)
        assert cand[0, s].sum() == s + 1


def test_pointer_mask_restricts_to_nonterminals():
    cfg = small_cfg("pointer")
    m = PointerModel(cfg)
    t = family()
    _, _, ptgt, cand, _, _ = m.encode_batch([t], [1], "dfs")
    walk = traverse(t, "dfs")
    for s in range(len(walk) - 1):
        for q in range(s + 1):
            expected = 0.0 if t.nodes[walk[q]].terminal else 1.0
            assert cand[0, s, q] == expected
        assert cand[0, s, ptgt[0, s]] == 1.0  # gold parent never masked


def test_recursive_ancestry_grows_with_depth():
    # chain root -> a -> b -> c
    chain = tree(
        (0, False, (0, 0, 72, 128), None),
        (1, False, (0, 0, 36, 64), 0),
        (2, False, (0, 0, 18, 32), 1),
        (3, True, (0, 0, 9, 16), 2),
    )
    passes = {p.parent: p for p in build_passes(chain)}
    assert len(passes[0].ancestry) == 1  # decoding depth-1 children: {root}
    assert len(passes[1].ancestry) == 2
    assert len(passes[2].ancestry) == 3


def test_recursive_forest_batching_matches_single():
    cfg = small_cfg("recursive")
    m = RecursiveModel(cfg)
    trees = [generate_synthetic(s) for s in range(6)]
    batched = m.forward_forest(trees)
    got: dict[tuple, dict[str, np.ndarray]] = {}
    for level in batched:
        for i, p in enumerate(level.passes):
            got[(p.tree_idx, p.parent)] = {
                z: level.logits[z].data[i] for z in level.logits}
    for ti, t in enumerate(trees):
        for level in m.forward_forest([t]):
            for i, p in enumerate(level.passes):
                ref = {z: level.logits[z].data[i] for z in level.logits}
                for z, arr in ref.items():
                    real = 1 + len(p.children)
                    np.testing.assert_allclose(
                        got[(ti, p.parent)][z][:real], arr[:real], atol=1e-5)


def test_recursive_locality_bitwise():
    cfg = small_cfg("recursive")
    m = RecursiveModel(cfg)
    base = tree(
        (0, False, (0, 0, 72, 128), None),
        (1, False, (0, 0, 36, 128), 0),
        (5, True, (0, 0, 36, 64), 1),
        (2, False, (36, 0, 72, 128), 0),
        (6, True, (36, 0, 72, 64), 3),
    )
    mutated_nodes = list(base.nodes)
    mutated_nodes[4] = LayoutNode(9, True, (40, 60, 70, 120), 3, 2)
    mutated = LayoutTree(tuple(mutated_nodes))

    def p1_children_logits(t):
        for level in m.forward_forest([t]):
            for i, p in enumerate(level.passes):
                if p.parent == 1:
                    return {z: level.logits[z].data[i].copy()
                            for z in level.logits}
        raise AssertionError("no pass for node 1")

    a = p1_children_logits(base)
    b = p1_children_logits(mutated)
    for z in a:
        np.testing.assert_array_equal(a[z], b[z])


def test_recursive_bootstrap_feeds_root_ancestry():
    cfg = small_cfg("recursive")
    m = RecursiveModel(cfg)
    t = family()
    state = m.bootstrap_state(t.nodes[0])
    assert state.shape == (cfg.hidden_dim,)
    logits, states = m.run_pass(t.nodes[0], [t.nodes[1]], state[None, :])
    assert logits["c"].shape == (2, m.vocab.c_classes)
    assert states.shape == (2, cfg.hidden_dim)


def test_recursive_eos_only_pass_scores():
    cfg = small_cfg("recursive")
    m = RecursiveModel(cfg)
    t = tree((0, False, (0, 0, 72, 128), None))
    loss, stats = m.loss([t], [1], "bfs")
    assert stats.scored == 1  # the root's EOS decision


@pytest.mark.parametrize("variant", ["vanilla", "pointer", "recursive"])
def test_loss_gradcheck_f64(variant):
    t = tree(
        (0, False, (0, 0, 6, 8), None),
        (1, True, (0, 0, 3, 8), 0),
        (2, True, (3, 0, 6, 8), 0),
    )
    cfg = ModelConfig(variant=variant, embed_dim=8, hidden_dim=8, layers=1,
                      heads=2, ffn_dim=16, seed=0, type_count=3, grid_w=6, grid_h=8)
    m = build_model(cfg, dtype=np.float64)
    rng = np.random.default_rng(42)
    for name, p in sorted(m.params.items()):
        p.data = p.data + rng.normal(size=p.data.shape) * 0.2
    names = sorted(m.params)
    params = [m.params[n] for n in names]

    def f(*ps):
        model = build_model(cfg, params=dict(zip(names, ps)), dtype=ps[0].dtype)
        if variant == "vanilla":
            loss, _ = model.loss([t], [1])
        else:
            loss, _ = model.loss([t], [1], "dfs")
        return loss

    assert ad.grad_check(f, params, eps=1e-5) < 1e-5


def test_token_prefix_len():
    t = family()
    seq = linearize(t)
    assert token_prefix_len(seq, 1) == 1
    # [root, OPEN, A, C, B, CLOSE] -> third node ends at position 4
    assert token_prefix_len(seq, 3) == 4


def test_model_save_load_round_trip(tmp_path):
    cfg = small_cfg("recursive")
    m = build_model(cfg)
    path = tmp_path / "m.ckpt"
    save_model(path, m, extra={"step": 7})
    loaded, extra = load_model(path)
    assert extra["step"] == 7
    assert loaded.cfg == cfg
    for name, p in m.params.items():
        np.testing.assert_array_equal(loaded.params[name].data, p.data)
    t = generate_synthetic(1)
    a, _ = m.loss([t], [1], "bfs")
    b, _ = loaded.loss([t], [1], "bfs")
    assert float(a.data) == pytest.approx(float(b.data))
