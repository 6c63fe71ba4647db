"""Build (once) the artifacts the frontend e2e test needs:

  .cache/e2e-pointer.ckpt   trained desk-scale pointer checkpoint
  .cache/e2e-partial.json   three placeable elements from a training tree

The three elements are the first breadth-first children of a training
layout's root, so a memorizing model reliably proposes a continuation.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

from layoutcomplete.corpus import load_manifest, synthetic_corpus
from layoutcomplete.harness import TrainConfig, train
from layoutcomplete.layout import child_table, traverse
from layoutcomplete.models import ModelConfig, build_model, save_model

CACHE = Path(__file__).resolve().parent.parent / ".cache"
CKPT = CACHE / "e2e-pointer.ckpt"
PARTIAL = CACHE / "e2e-partial.json"


def main() -> None:
    CACHE.mkdir(exist_ok=True)
    manifest = load_manifest()
    corpus = synthetic_corpus(64, seed=100)

    chosen = None
    for tree in corpus:
        if len(child_table(tree)[0]) >= 3:
            chosen = tree
            break
    assert chosen is not None, "no training tree with three root children"
    walk = traverse(chosen, "bfs")
    elements = []
    for idx in walk[1:4]:
        node = chosen.nodes[idx]
        elements.append({
            "type": manifest[node.type_id],
            "bounds": list(node.bounds),
            "terminal": node.terminal,
        })
    PARTIAL.write_text(json.dumps({
        "rootType": manifest[chosen.nodes[0].type_id],
        "elements": elements,
    }, indent=2))

    if CKPT.exists():
        print(f"checkpoint already cached at {CKPT}")
        return
    model = build_model(ModelConfig(variant="pointer", seed=0))
    cfg = TrainConfig(steps=900, batch_size=16, eval_every=150, patience=1000,
                      peak_lr=0.01, warmup=100, seed=0)
    result = train(model, corpus, corpus, cfg, order="bfs",
                   log=lambda m: print(m, flush=True))
    print(f"train accuracy {result.final_train_accuracy:.3f}")
    save_model(CKPT, result.model, extra={"purpose": "frontend e2e"})
    print(f"wrote {CKPT}")


if __name__ == "__main__":
    sys.exit(main())
