"""Autoregressive completion of partial layouts.

A completion run is a sequence of discrete decisions (emit a node with
its six properties, open/close a bracket group, point at a parent, or
stop). Greedy search takes the best decision at every step; beam search
keeps the `beam_width` best prefixes by summed log-probability and
additionally merges the greedy rollout into the pool, so width 1
reduces to greedy exactly and widening never loses to it.

Decoded bounds may violate containment; repair clips them into the
parent after search (never inside the probability model) and the given
nodes are never touched.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, replace

import numpy as np

from .layout import (
    CLOSE,
    GRID_H,
    GRID_W,
    MAX_CHILDREN,
    MAX_NODES,
    OPEN,
    LayoutNode,
    LayoutTree,
    Order,
    PartialTree,
    Token,
    TreeBuilder,
    child_table,
    linearize,
    traverse,
    validate_tree,
)
from .models import AnyModel, PointerModel, RecursiveModel, VanillaModel
from .models.nn import NEG
from .models.vanilla import token_prefix_len

STEP_CAP = 400


class PrefixViolation(ValueError):
    """The partial cannot be a preorder prefix of any completion."""


class DecodeTimeout(RuntimeError):
    pass


@dataclass(frozen=True)
class DecodeConfig:
    strategy: str = "greedy"  # greedy | beam | sample
    beam_width: int = 1
    max_new_nodes: int | None = None  # default: MAX_NODES - k
    temperature: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.strategy not in ("greedy", "beam", "sample"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.beam_width < 1:
            raise ValueError("beam_width must be >= 1")
        if self.max_new_nodes is not None and self.max_new_nodes < 0:
            raise ValueError("max_new_nodes must be >= 0")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")


@dataclass
class Completion:
    tree: LayoutTree
    log_prob: float
    new_node_count: int
    new_flags: tuple[bool, ...]
    budget_exhausted: bool = False
    repairs: int = 0


def _logp(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max()
    return shifted - np.log(np.exp(shifted).sum())


def step_select(dist: dict[str, np.ndarray], mode: str = "greedy",
                rng: np.random.Generator | None = None,
                temperature: float = 1.0) -> dict[str, int]:
    """Pick one value per head. Greedy is per-head argmax with the
    lowest index winning ties; sample draws per head at the given
    temperature."""
    out = {}
    for name, logits in dist.items():
        if mode == "greedy":
            out[name] = int(np.argmax(logits))
        else:
            p = np.exp(_logp(logits / temperature))
            out[name] = int(rng.choice(len(p), p=p / p.sum()))
    return out


def kbest_product(heads: list[np.ndarray], k: int) -> list[tuple[float, tuple[int, ...]]]:
    """Top-k assignments over independent heads by summed log-prob.

    Lazy frontier search over per-head descending orders; ties resolve
    to lower original indices.
    """
    orders = [np.argsort(-h, kind="stable") for h in heads]
    sortedv = [h[o] for h, o in zip(heads, orders)]

    def score(combo: tuple[int, ...]) -> float:
        return float(sum(v[c] for v, c in zip(sortedv, combo)))

    start = tuple(0 for _ in heads)
    heap = [(-score(start), start)]
    seen = {start}
    out: list[tuple[float, tuple[int, ...]]] = []
    while heap and len(out) < k:
        neg, combo = heapq.heappop(heap)
        out.append((-neg, tuple(int(o[c]) for o, c in zip(orders, combo))))
        for i in range(len(heads)):
            if combo[i] + 1 < len(sortedv[i]):
                nxt = combo[:i] + (combo[i] + 1,) + combo[i + 1:]
                if nxt not in seen:
                    seen.add(nxt)
                    heapq.heappush(heap, (-score(nxt), nxt))
    return out


# ---------------------------------------------------------------------------
# per-variant search states
# ---------------------------------------------------------------------------


class _State:
    """One partial decode. Subclasses implement candidates()/apply()."""

    logp: float
    new_nodes: int
    steps: int
    finished: bool
    budget_exhausted: bool

    def candidates(self, k: int) -> list[tuple[float, tuple]]:
        raise NotImplementedError

    def apply(self, action: tuple) -> "_State":
        raise NotImplementedError

    def assemble(self) -> tuple[LayoutTree, list[bool]]:
        """Final tree (pre-repair) plus per-node new flags."""
        raise NotImplementedError


def _node_candidates(c_logp: np.ndarray, heads: dict[str, np.ndarray],
                     node_type_ids: np.ndarray, extra: list[np.ndarray],
                     k: int) -> list[tuple[float, tuple]]:
    """Top-k ("node", c, t, x, y, xh, yh, *extra-ids) actions."""
    lists = [c_logp[node_type_ids]]
    lists += [_logp(heads[z]) for z in ("t", "x", "y", "xh", "yh")]
    lists += extra
    out = []
    for score, ids in kbest_product(lists, k):
        out.append((score, ("node", int(node_type_ids[ids[0]]), *ids[1:])))
    return out


class _VanillaState(_State):
    def __init__(self, model: VanillaModel, tokens: list[Token], given: int,
                 budget: int):
        self.model = model
        self.tokens = tokens
        self.builder = TreeBuilder()
        for tok in tokens:
            self.builder.feed(tok)
        self.given = given
        self.budget = budget
        self.logp = 0.0
        self.new_nodes = 0
        self.steps = 0
        self.finished = False
        self.budget_exhausted = False

    def clone(self) -> "_VanillaState":
        dup = object.__new__(_VanillaState)
        dup.__dict__.update(self.__dict__)
        dup.tokens = list(self.tokens)
        dup.builder = TreeBuilder()
        for tok in dup.tokens:
            dup.builder.feed(tok)
        return dup

    def candidates(self, k: int) -> list[tuple[float, tuple]]:
        heads = self.model.next_logits([self.tokens])[0]
        vocab = self.model.vocab
        c = heads["c"].copy()
        nodes_allowed = self.new_nodes < self.budget
        parent = self.builder.peek_parent()
        if parent is not None and self.builder.children_of(parent) >= MAX_CHILDREN:
            nodes_allowed = False
        if not nodes_allowed:
            c[: vocab.types] = NEG
            c[vocab.open_id] = NEG
        if not self.builder.has_open_scope:
            c[vocab.close_id] = NEG
        c_logp = _logp(c)
        out = [(float(c_logp[vocab.eos_id]), ("eos",))]
        if c_logp[vocab.open_id] > NEG / 2:
            out.append((float(c_logp[vocab.open_id]), ("open",)))
        if c_logp[vocab.close_id] > NEG / 2:
            out.append((float(c_logp[vocab.close_id]), ("close",)))
        if nodes_allowed:
            out += _node_candidates(c_logp, heads, np.arange(vocab.types), [], k)
        out.sort(key=lambda sc: (-sc[0], sc[1]))
        return out[:k]

    def apply(self, action: tuple) -> "_VanillaState":
        dup = self.clone()
        dup.steps += 1
        if action[0] == "eos":
            dup.finished = True
        elif action[0] == "open":
            dup.tokens.append(OPEN)
            dup.builder.feed(OPEN)
        elif action[0] == "close":
            dup.tokens.append(CLOSE)
            dup.builder.feed(CLOSE)
        else:
            _, c, t, x, y, xh, yh = action
            node = LayoutNode(c, bool(t), (x, y, xh, yh), None, 0)
            dup.tokens.append(node)
            dup.builder.feed(node)
            dup.new_nodes += 1
        if dup.steps >= STEP_CAP:
            dup.finished = True
            dup.budget_exhausted = True
        return dup

    def assemble(self) -> tuple[LayoutTree, list[bool]]:
        tree = self.builder.finish()
        flags = [i >= self.given for i in range(len(tree.nodes))]
        return tree, flags


class _PointerState(_State):
    def __init__(self, model: PointerModel, nodes: list[LayoutNode], given: int,
                 budget: int):
        self.model = model
        self.nodes = nodes  # storage == sequence order
        self.given = given
        self.budget = budget
        self.child_count = [0] * len(nodes)
        for n in nodes:
            if n.parent is not None:
                self.child_count[n.parent] += 1
        self.logp = 0.0
        self.new_nodes = 0
        self.steps = 0
        self.finished = False
        self.budget_exhausted = False

    def clone(self) -> "_PointerState":
        dup = object.__new__(_PointerState)
        dup.__dict__.update(self.__dict__)
        dup.nodes = list(self.nodes)
        dup.child_count = list(self.child_count)
        return dup

    def candidates(self, k: int) -> list[tuple[float, tuple]]:
        seq = [(n.type_id, n.terminal, n.bounds) for n in self.nodes]
        flags = [n.terminal for n in self.nodes]
        heads = self.model.next_logits([seq], [flags])[0]
        vocab = self.model.vocab
        c = heads["c"].copy()
        c[vocab.open_id] = NEG
        c[vocab.close_id] = NEG
        parent_scores = heads["parent"].copy()
        for q in range(len(self.nodes)):
            if self.child_count[q] >= MAX_CHILDREN:
                parent_scores[q] = NEG
        have_parent = parent_scores.max() > NEG / 2
        if self.new_nodes >= self.budget or not have_parent:
            c[: vocab.types] = NEG
        c_logp = _logp(c)
        out = [(float(c_logp[vocab.eos_id]), ("eos",))]
        if c_logp[: vocab.types].max() > NEG / 2:
            out += _node_candidates(c_logp, heads, np.arange(vocab.types),
                                    [_logp(parent_scores)], k)
        out.sort(key=lambda sc: (-sc[0], sc[1]))
        return out[:k]

    def apply(self, action: tuple) -> "_PointerState":
        dup = self.clone()
        dup.steps += 1
        if action[0] == "eos":
            dup.finished = True
            return dup
        _, c, t, x, y, xh, yh, parent = action
        parent_node = dup.nodes[parent]
        if parent_node.terminal:
            # reachable only with mask_terminals=False
            dup.nodes[parent] = replace(parent_node, terminal=False)
        node = LayoutNode(c, bool(t), (x, y, xh, yh), parent,
                          dup.nodes[parent].depth + 1)
        dup.nodes.append(node)
        dup.child_count[parent] += 1
        dup.child_count.append(0)
        dup.new_nodes += 1
        if dup.steps >= STEP_CAP or len(dup.nodes) >= MAX_NODES:
            dup.finished = True
            dup.budget_exhausted = True
        return dup

    def assemble(self) -> tuple[LayoutTree, list[bool]]:
        tree = LayoutTree(tuple(self.nodes))
        flags = [i >= self.given for i in range(len(self.nodes))]
        return tree, flags


class _RecursiveState(_State):
    """Frontier of open sibling lists, processed shallow-first."""

    def __init__(self, model: RecursiveModel, partial: LayoutTree, budget: int):
        self.model = model
        self.budget = budget
        self.nodes: list[LayoutNode] = list(partial.nodes)
        self.given = len(self.nodes)
        table = child_table(partial)
        self.children: dict[int, list[int]] = {i: list(table[i])
                                               for i in range(len(self.nodes))}
        self.states: dict[int, np.ndarray] = {}
        self.states[0] = model.bootstrap_state(self.nodes[0])
        # open lists in frontier order: (depth, parent index)
        self.queue: list[int] = sorted(
            (i for i, n in enumerate(self.nodes) if not n.terminal),
            key=lambda i: (self.nodes[i].depth, i),
        )
        self.cursor = 0
        self.logp = 0.0
        self.new_nodes = 0
        self.steps = 0
        self.finished = not self.queue
        self.budget_exhausted = False
        if not self.finished:
            self._ensure_states_for(self.queue[0])

    def clone(self) -> "_RecursiveState":
        dup = object.__new__(_RecursiveState)
        dup.__dict__.update(self.__dict__)
        dup.nodes = list(self.nodes)
        dup.children = {k: list(v) for k, v in self.children.items()}
        dup.states = dict(self.states)
        dup.queue = list(self.queue)
        return dup

    def _ancestry(self, parent: int) -> list[int]:
        path = []
        j: int | None = parent
        while j is not None:
            path.append(j)
            j = self.nodes[j].parent
        return path[::-1]

    def _run(self, parent: int) -> tuple[dict[str, np.ndarray], np.ndarray]:
        anc = np.stack([self.states[a] for a in self._ancestry(parent)])
        siblings = [self.nodes[c] for c in self.children[parent]]
        return self.model.run_pass(self.nodes[parent], siblings, anc)

    def _ensure_states_for(self, parent: int) -> None:
        """States for the ancestry of `parent` exist by construction;
        nothing to compute here beyond the assertion."""
        for a in self._ancestry(parent):
            if a != parent and a not in self.states:
                raise RuntimeError(f"missing ancestry state for node {a}")

    def candidates(self, k: int) -> list[tuple[float, tuple]]:
        parent = self.queue[self.cursor]
        logits, _ = self._run(parent)
        heads = {z: v[-1] for z, v in logits.items()}
        vocab = self.model.vocab
        c = heads["c"].copy()
        c[vocab.open_id] = NEG
        c[vocab.close_id] = NEG
        if (self.new_nodes >= self.budget
                or len(self.children[parent]) >= MAX_CHILDREN):
            c[: vocab.types] = NEG
        c_logp = _logp(c)
        out = [(float(c_logp[vocab.eos_id]), ("eos",))]
        if c_logp[: vocab.types].max() > NEG / 2:
            out += _node_candidates(c_logp, heads, np.arange(vocab.types), [], k)
        out.sort(key=lambda sc: (-sc[0], sc[1]))
        return out[:k]

    def apply(self, action: tuple) -> "_RecursiveState":
        dup = self.clone()
        dup.steps += 1
        parent = dup.queue[dup.cursor]
        if action[0] == "eos":
            # close the list; harvest per-child states for deeper passes
            _, states = dup._run(parent)
            new_parents = []
            for rank, child in enumerate(dup.children[parent]):
                dup.states[child] = states[rank + 1]
                if not dup.nodes[child].terminal and child not in dup.children:
                    dup.children[child] = []
                if not dup.nodes[child].terminal and child not in dup.queue:
                    new_parents.append(child)
            dup.queue.extend(sorted(new_parents,
                                    key=lambda i: (dup.nodes[i].depth, i)))
            dup.cursor += 1
            dup.finished = dup.cursor >= len(dup.queue)
        else:
            _, c, t, x, y, xh, yh = action
            node = LayoutNode(c, bool(t), (x, y, xh, yh), parent,
                              dup.nodes[parent].depth + 1)
            idx = len(dup.nodes)
            dup.nodes.append(node)
            dup.children[parent].append(idx)
            dup.new_nodes += 1
        if dup.steps >= STEP_CAP:
            dup.finished = True
            dup.budget_exhausted = True
        return dup

    def assemble(self) -> tuple[LayoutTree, list[bool]]:
        tree = LayoutTree(tuple(self.nodes))
        flags = [i >= self.given for i in range(len(self.nodes))]
        return tree, flags


# ---------------------------------------------------------------------------
# search drivers
# ---------------------------------------------------------------------------


def _check_deadline(deadline: float | None) -> None:
    if deadline is not None and time.monotonic() > deadline:
        raise DecodeTimeout("completion exceeded its deadline")


def _greedy(state: _State, deadline: float | None,
            rng: np.random.Generator | None = None,
            temperature: float = 1.0) -> _State:
    # with an rng this becomes truncated sampling over the top-8 joint
    # candidates at the given temperature
    while not state.finished:
        _check_deadline(deadline)
        cands = state.candidates(1 if rng is None else 8)
        if rng is None:
            logp, action = cands[0]
        else:
            weights = np.exp(np.array([c[0] for c in cands]) / temperature)
            pick = int(rng.choice(len(cands), p=weights / weights.sum()))
            logp, action = cands[pick]
        nxt = state.apply(action)
        nxt.logp = state.logp + logp
        state = nxt
    return state


def _beam(state: _State, width: int, deadline: float | None) -> list[_State]:
    live = [state]
    done: list[_State] = []
    while live and len(done) < width * 4:
        _check_deadline(deadline)
        pool: list[tuple[float, int, int, _State, tuple]] = []
        for bi, st in enumerate(live):
            for ci, (logp, action) in enumerate(st.candidates(width)):
                pool.append((st.logp + logp, bi, ci, st, action))
        pool.sort(key=lambda item: (-item[0], item[1], item[2]))
        nxt: list[_State] = []
        for total, _, _, st, action in pool[:width]:
            new = st.apply(action)
            new.logp = total
            (done if new.finished else nxt).append(new)
        live = nxt
    done.sort(key=lambda s: -s.logp)
    return done


# ---------------------------------------------------------------------------
# prompt construction and repair
# ---------------------------------------------------------------------------


def open_frontier_tokens(partial: LayoutTree) -> list[Token]:
    """Token prompt for continuing a partial in preorder.

    Groups along the rightmost (preorder-last) path are emitted opened
    and unclosed, and bracketed even with a single child so the model
    can append siblings; closed groups follow the standard rule.
    Raises PrefixViolation when a childless non-terminal sits off that
    path: no preorder continuation could ever reach it.
    """
    table = child_table(partial)
    walk = traverse(partial, "dfs")
    last = walk[-1]
    path = set()
    j: int | None = last
    while j is not None:
        path.add(j)
        j = partial.nodes[j].parent
    for i, node in enumerate(partial.nodes):
        if not node.terminal and not table[i] and i not in path:
            raise PrefixViolation(
                f"non-terminal node {i} has no children and is not on the "
                "rightmost path"
            )
    out: list[Token] = []

    def walk_node(i: int) -> None:
        out.append(partial.nodes[i])
        kids = table[i]
        if not kids:
            return
        bracket = len(kids) >= 2 or i in path
        if bracket:
            out.append(OPEN)
        for c in kids:
            walk_node(c)
        if bracket and i not in path:
            out.append(CLOSE)

    walk_node(0)
    return out


def repair(tree: LayoutTree, protected: frozenset[int] = frozenset()
           ) -> tuple[LayoutTree, int]:
    """Clip decoded bounds into the parent (and the screen), widening
    zero-area results. Protected nodes are returned untouched."""
    nodes = list(tree.nodes)
    count = 0
    for i, node in enumerate(nodes):
        if i in protected:
            continue
        if node.parent is None:
            px, py, pxh, pyh = 0, 0, GRID_W, GRID_H
        else:
            px, py, pxh, pyh = nodes[node.parent].bounds
        x, y, xh, yh = node.bounds
        nx = min(max(x, px), pxh - 1)
        nxh = min(max(xh, nx + 1), pxh)
        ny = min(max(y, py), pyh - 1)
        nyh = min(max(yh, ny + 1), pyh)
        if (nx, ny, nxh, nyh) != node.bounds:
            nodes[i] = replace(node, bounds=(nx, ny, nxh, nyh))
            count += 1
    return LayoutTree(tuple(nodes), tree.source_id), count


def _canonicalize_tracked(tree: LayoutTree, flags: list[bool]
                          ) -> tuple[LayoutTree, tuple[bool, ...]]:
    table = child_table(tree)
    for i, kids in enumerate(table):
        kids.sort(key=lambda c: (tree.nodes[c].y, tree.nodes[c].x, c))
    nodes: list[LayoutNode] = []
    out_flags: list[bool] = []

    def walk(old: int, parent: int | None) -> None:
        idx = len(nodes)
        depth = 0 if parent is None else nodes[parent].depth + 1
        nodes.append(replace(tree.nodes[old], parent=parent, depth=depth))
        out_flags.append(flags[old])
        for c in table[old]:
            walk(c, idx)

    walk(0, None)
    return LayoutTree(tuple(nodes), tree.source_id), tuple(out_flags)


def _finalize(state: _State, source_id: str) -> Completion:
    raw, flags = state.assemble()
    protected = frozenset(i for i, is_new in enumerate(flags) if not is_new)
    repaired, n_repairs = repair(raw, protected)
    tree, out_flags = _canonicalize_tracked(
        LayoutTree(repaired.nodes, source_id), list(flags))
    validate_tree(tree)
    return Completion(
        tree=tree,
        log_prob=state.logp,
        new_node_count=state.new_nodes,
        new_flags=out_flags,
        budget_exhausted=state.budget_exhausted,
        repairs=n_repairs,
    )


def _initial_state(model: AnyModel, partial: PartialTree, cfg: DecodeConfig,
                   order: Order, gold_tree: LayoutTree | None) -> _State:
    budget = MAX_NODES - len(partial.nodes)
    if cfg.max_new_nodes is not None:
        budget = min(budget, cfg.max_new_nodes)
    if isinstance(model, VanillaModel):
        if gold_tree is not None:
            seq = linearize(gold_tree)
            tokens = list(seq[:token_prefix_len(seq, partial.k)])
        else:
            tokens = open_frontier_tokens(partial)
        return _VanillaState(model, tokens, given=len(partial.nodes), budget=budget)
    if isinstance(model, PointerModel):
        walk = traverse(partial, order)
        remap = {old: new for new, old in enumerate(walk)}
        nodes = [
            replace(partial.nodes[old],
                    parent=None if partial.nodes[old].parent is None
                    else remap[partial.nodes[old].parent])
            for old in walk
        ]
        return _PointerState(model, nodes, given=len(nodes), budget=budget)
    if isinstance(model, RecursiveModel):
        return _RecursiveState(model, partial, budget=budget)
    raise TypeError(f"unsupported model {type(model)!r}")


def complete(model: AnyModel, partial: PartialTree, cfg: DecodeConfig,
             order: Order = "dfs", gold_tree: LayoutTree | None = None,
             timeout_s: float | None = None) -> list[Completion]:
    """Complete a partial layout; returns candidates sorted by
    non-increasing log-probability.

    For the vanilla variant the partial must be extendable in preorder;
    gold_tree switches the prompt to the exact token prefix of that
    tree's linearization (evaluation setups).
    """
    validate_tree(partial)
    deadline = None if timeout_s is None else time.monotonic() + timeout_s
    state = _initial_state(model, partial, cfg, order, gold_tree)
    if cfg.strategy == "greedy":
        return [_finalize(_greedy(state, deadline), partial.source_id)]
    if cfg.strategy == "sample":
        rng = np.random.default_rng(cfg.seed)
        final = _greedy(state, deadline, rng=rng, temperature=cfg.temperature)
        return [_finalize(final, partial.source_id)]
    results = _beam(state, cfg.beam_width, deadline)
    greedy_final = _greedy(_initial_state(model, partial, cfg, order, gold_tree),
                           deadline)
    completions = [_finalize(s, partial.source_id) for s in results]
    completions.append(_finalize(greedy_final, partial.source_id))
    unique: dict[tuple, Completion] = {}
    for comp in completions:
        key = comp.tree.key()
        if key not in unique or comp.log_prob > unique[key].log_prob:
            unique[key] = comp
    ranked = sorted(unique.values(), key=lambda c: -c.log_prob)
    return ranked[: max(cfg.beam_width, 1)]


# ---------------------------------------------------------------------------
# one-step prediction (next-element metric)
# ---------------------------------------------------------------------------


def predict_next(model: AnyModel, tree: LayoutTree, k: int, order: Order
                 ) -> tuple[int, int, int, int, int, int] | None:
    """Greedy one-element continuation of the gold prefix; None if the
    model ends the sequence instead."""
    if isinstance(model, VanillaModel):
        seq = linearize(tree)
        tokens = list(seq[:token_prefix_len(seq, k)])
        for _ in range(8):
            heads = model.next_logits([tokens])[0]
            vocab = model.vocab
            choice = int(np.argmax(heads["c"]))
            if choice == vocab.eos_id:
                return None
            if choice == vocab.open_id:
                tokens.append(OPEN)
                continue
            if choice == vocab.close_id:
                tokens.append(CLOSE)
                continue
            sel = step_select({z: heads[z] for z in ("t", "x", "y", "xh", "yh")})
            return (choice, sel["t"], sel["x"], sel["y"], sel["xh"], sel["yh"])
        return None
    if isinstance(model, PointerModel):
        walk = traverse(tree, order)[:k]
        seq = [(tree.nodes[i].type_id, tree.nodes[i].terminal, tree.nodes[i].bounds)
               for i in walk]
        flags = [tree.nodes[i].terminal for i in walk]
        heads = model.next_logits([seq], [flags])[0]
        vocab = model.vocab
        c = heads["c"].copy()
        c[vocab.open_id] = NEG
        c[vocab.close_id] = NEG
        choice = int(np.argmax(c))
        if choice == vocab.eos_id:
            return None
        sel = step_select({z: heads[z] for z in ("t", "x", "y", "xh", "yh")})
        return (choice, sel["t"], sel["x"], sel["y"], sel["xh"], sel["yh"])
    if isinstance(model, RecursiveModel):
        walk = traverse(tree, order)
        given = set(walk[:k])
        target_parent = tree.nodes[walk[k]].parent if k < len(walk) else None
        if target_parent is None:
            return None
        table = child_table(tree)
        states: dict[int, np.ndarray] = {0: model.bootstrap_state(tree.nodes[0])}
        # teacher-forced passes over the given part, shallow first
        parents = sorted(
            (i for i in given if not tree.nodes[i].terminal),
            key=lambda i: (tree.nodes[i].depth, i),
        )
        for p in parents:
            kids = [c for c in table[p] if c in given]
            anc_path = []
            j: int | None = p
            while j is not None:
                anc_path.append(j)
                j = tree.nodes[j].parent
            anc = np.stack([states[a] for a in anc_path[::-1]])
            logits, hs = model.run_pass(tree.nodes[p],
                                        [tree.nodes[c] for c in kids], anc)
            for rank, c in enumerate(kids):
                states[c] = hs[rank + 1]
            if p == target_parent:
                heads = {z: v[-1] for z, v in logits.items()}
                vocab = model.vocab
                cl = heads["c"].copy()
                cl[vocab.open_id] = NEG
                cl[vocab.close_id] = NEG
                choice = int(np.argmax(cl))
                if choice == vocab.eos_id:
                    return None
                sel = step_select({z: heads[z] for z in ("t", "x", "y", "xh", "yh")})
                return (choice, sel["t"], sel["x"], sel["y"], sel["xh"], sel["yh"])
        return None
    raise TypeError(f"unsupported model {type(model)!r}")
