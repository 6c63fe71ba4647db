"""Command-line interface.

Typical flow:

    layoutcomplete synth --count 200 --out-dir data/
    layoutcomplete ingest --data-dir data/ --out corpus.jsonl
    layoutcomplete split --corpus corpus.jsonl --out-dir splits/
    layoutcomplete train --variant pointer --corpus splits/train.jsonl \
        --valid splits/valid.jsonl --order dfs --out pointer-dfs.ckpt
    layoutcomplete eval --checkpoint pointer-dfs.ckpt --corpus splits/test.jsonl \
        --order dfs --fraction 0.5
    layoutcomplete matrix --config matrix.json
    layoutcomplete complete --checkpoint pointer-dfs.ckpt --partial design.json
    layoutcomplete serve --checkpoint pointer-dfs.ckpt --port 8000
"""

from __future__ import annotations

import json
from pathlib import Path

import click

from .corpus import (
    SyntheticParams,
    ingest_corpus,
    load_corpus_jsonl,
    load_manifest,
    save_corpus_jsonl,
    synthetic_corpus,
    write_corpus,
)
from .decoding import DecodeConfig, complete
from .harness import (
    FRACTIONS,
    ModelCompleter,
    TrainConfig,
    build_matrix_completers,
    evaluate_cell,
    run_matrix,
    split_corpus,
    train,
)
from .metrics import CostTable, mean_completions
from .models import ModelConfig, build_model, load_model, save_model


@click.group()
def main() -> None:
    """Layout auto-completion toolkit."""


@main.command()
@click.option("--count", type=int, required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out-dir", type=click.Path(), required=True)
@click.option("--max-depth", type=int, default=4, show_default=True)
@click.option("--max-children", type=int, default=4, show_default=True)
@click.option("--manifest", type=click.Path(exists=True), default=None)
def synth(count, seed, out_dir, max_depth, max_children, manifest):
    """Write a deterministic synthetic dataset (layout file schema)."""
    names = load_manifest(manifest)
    params = SyntheticParams(max_depth=max_depth, max_children=max_children,
                             type_count=len(names))
    trees = synthetic_corpus(count, seed=seed, params=params)
    write_corpus(trees, out_dir, names)
    click.echo(f"wrote {len(trees)} layouts to {out_dir}")


@main.command()
@click.option("--data-dir", type=click.Path(exists=True), required=True)
@click.option("--manifest", type=click.Path(exists=True), default=None)
@click.option("--out", type=click.Path(), required=True)
@click.option("--shuffle-children", type=int, default=None,
              help="randomize sibling order with this seed (ablation)")
@click.option("--ambiguity", is_flag=True,
              help="also report mean completions per order and fraction")
def ingest(data_dir, manifest, out, shuffle_children, ambiguity):
    """Parse, discretize, validate, and consolidate a layout dataset."""
    names = load_manifest(manifest)
    result = ingest_corpus(data_dir, names, shuffle_seed=shuffle_children)
    save_corpus_jsonl(result.trees, out, names)
    s = result.stats
    click.echo(f"layouts: {s.num_layouts}")
    click.echo(f"nodes: mean {s.mean_nodes:.2f} max {s.max_nodes} min {s.min_nodes}")
    click.echo(f"depth: mean {s.mean_depth:.2f} max {s.max_depth} min {s.min_depth}")
    click.echo(f"parse errors: {result.parse_errors}")
    for reason, count in sorted(result.rejected.items()):
        click.echo(f"rejected {reason}: {count}")
    if ambiguity:
        for order in ("bfs", "dfs"):
            values = [mean_completions(result.trees, order, f) for f in FRACTIONS]
            pretty = ", ".join(f"{int(f * 100)}%: {v:.2f}"
                               for f, v in zip(FRACTIONS, values))
            click.echo(f"mean completions ({order}): {pretty}")


@main.command()
@click.option("--corpus", type=click.Path(exists=True), required=True)
@click.option("--ratios", default="0.8,0.1,0.1", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out-dir", type=click.Path(), required=True)
@click.option("--manifest", type=click.Path(exists=True), default=None)
def split(corpus, ratios, seed, out_dir, manifest):
    """Split a corpus into train/valid/test files."""
    names = load_manifest(manifest)
    trees = load_corpus_jsonl(corpus, names)
    r = tuple(float(x) for x in ratios.split(","))
    if len(r) != 3:
        raise click.BadParameter("ratios must be three comma-separated numbers")
    parts = split_corpus(trees, r, seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, part in zip(("train", "valid", "test"), parts):
        save_corpus_jsonl(part, out / f"{name}.jsonl", names)
        click.echo(f"{name}: {len(part)} trees")


@main.command(name="train")
@click.option("--variant", type=click.Choice(["vanilla", "pointer", "recursive"]),
              required=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="model config JSON; defaults to the desk-scale config")
@click.option("--corpus", type=click.Path(exists=True), required=True)
@click.option("--valid", type=click.Path(exists=True), required=True)
@click.option("--order", type=click.Choice(["bfs", "dfs"]), default="dfs",
              show_default=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--steps", type=int, default=2000, show_default=True)
@click.option("--batch-size", type=int, default=16, show_default=True)
@click.option("--peak-lr", type=float, default=3e-3, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--state-out", type=click.Path(), default=None,
              help="write resumable training state here at every eval")
@click.option("--resume", type=click.Path(exists=True), default=None)
@click.option("--manifest", type=click.Path(exists=True), default=None)
def train_cmd(variant, config_path, corpus, valid, order, out, steps,
              batch_size, peak_lr, seed, state_out, resume, manifest):
    """Train one decoder variant and checkpoint the best parameters."""
    names = load_manifest(manifest)
    train_set = load_corpus_jsonl(corpus, names)
    valid_set = load_corpus_jsonl(valid, names)
    if config_path is not None:
        cfg = ModelConfig.load(config_path)
        if cfg.variant != variant:
            raise click.BadParameter(
                f"config is for {cfg.variant!r}, asked for {variant!r}")
    else:
        cfg = ModelConfig(variant=variant, seed=seed, type_count=len(names))
    model = build_model(cfg)
    tc = TrainConfig(steps=steps, batch_size=batch_size, peak_lr=peak_lr,
                     seed=seed)
    result = train(model, train_set, valid_set, tc, order=order,
                   state_path=state_out, resume_from=resume, log=click.echo)
    save_model(out, result.model, extra={
        "best_step": result.best_step,
        "best_valid": result.best_valid,
        "order": order,
    })
    curve_path = Path(out).with_suffix(".curve.tsv")
    lines = ["step\ttrain_loss\tvalid_loss"]
    lines += [f"{s}\t{tr:.6f}\t{va:.6f}" for s, tr, va in result.curve]
    curve_path.write_text("\n".join(lines) + "\n")
    click.echo(f"best valid {result.best_valid:.4f} at step {result.best_step}; "
               f"train structure+type accuracy {result.final_train_accuracy:.1%}")
    click.echo(f"checkpoint: {out}")


@main.command(name="eval")
@click.option("--checkpoint", type=click.Path(exists=True), required=True)
@click.option("--corpus", type=click.Path(exists=True), required=True)
@click.option("--order", type=click.Choice(["bfs", "dfs"]), required=True)
@click.option("--fraction", type=float, required=True)
@click.option("--relaxed", is_flag=True)
@click.option("--costs", type=click.Path(exists=True), default=None)
@click.option("--manifest", type=click.Path(exists=True), default=None)
def eval_cmd(checkpoint, corpus, order, fraction, relaxed, costs, manifest):
    """Score one (checkpoint, order, fraction) cell on a corpus."""
    names = load_manifest(manifest)
    trees = load_corpus_jsonl(corpus, names)
    model, _ = load_model(checkpoint)
    table = CostTable.load(costs) if costs else CostTable()
    cell = evaluate_cell(ModelCompleter(model), trees, fraction, order, table)
    chosen = cell[relaxed]
    mode = "relaxed" if relaxed else "strict"
    click.echo(f"{model.cfg.variant} {order} {int(fraction * 100)}% ({mode}): "
               f"F1 {chosen.f1:.2f} Next {chosen.next_accuracy:.2f} "
               f"Edit {chosen.edit_distance:.2f} "
               f"(P {chosen.precision:.2f} R {chosen.recall:.2f})")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
def matrix(config_path):
    """Run the full evaluation matrix from a config file.

    Config JSON: {"test_corpus": path, "out_dir": path,
    "checkpoints": {"pointer:bfs": path, ...}, optional "manifest",
    "orders", "fractions", "costs"}.
    """
    doc = json.loads(Path(config_path).read_text())
    names = load_manifest(doc.get("manifest"))
    trees = load_corpus_jsonl(doc["test_corpus"], names)
    checkpoints = {}
    for key, path in doc["checkpoints"].items():
        variant, order = key.split(":")
        checkpoints[(variant, order)] = path
    completers = build_matrix_completers(checkpoints)
    costs = CostTable.load(doc["costs"]) if "costs" in doc else CostTable()
    result = run_matrix(
        completers,
        trees,
        doc["out_dir"],
        orders=tuple(doc.get("orders", ["bfs", "dfs"])),
        fractions=tuple(doc.get("fractions", list(FRACTIONS))),
        costs=costs,
        log=click.echo,
    )
    click.echo(f"reports in {doc['out_dir']}")
    return result


@main.command(name="complete")
@click.option("--checkpoint", type=click.Path(exists=True), required=True)
@click.option("--partial", "partial_path", type=click.Path(exists=True),
              required=True, help="wire-schema JSON (a node tree)")
@click.option("--strategy", type=click.Choice(["greedy", "beam"]),
              default="greedy", show_default=True)
@click.option("--beam-width", type=int, default=1, show_default=True)
@click.option("--order", type=click.Choice(["bfs", "dfs"]), default="dfs",
              show_default=True)
@click.option("--out", type=click.Path(), default=None,
              help="write the completed wire JSON here instead of stdout")
@click.option("--manifest", type=click.Path(exists=True), default=None)
def complete_cmd(checkpoint, partial_path, strategy, beam_width, order, out,
                 manifest):
    """Complete one partial design and emit the result as wire JSON."""
    from .service import WireNode, tree_to_wire, wire_to_partial

    names = load_manifest(manifest)
    type_ids = {name: i for i, name in enumerate(names)}
    doc = json.loads(Path(partial_path).read_text())
    wire = WireNode.model_validate(doc)
    partial = wire_to_partial(wire, type_ids)
    model, _ = load_model(checkpoint)
    cfg = DecodeConfig(strategy=strategy, beam_width=beam_width)
    completions = complete(model, partial, cfg, order=order)
    payload = [
        {
            "root": tree_to_wire(c.tree, names, c.new_flags).model_dump(),
            "logProb": c.log_prob,
            "newNodeCount": c.new_node_count,
        }
        for c in completions
    ]
    text = json.dumps(payload if len(payload) > 1 else payload[0], indent=2)
    if out:
        Path(out).write_text(text)
    else:
        click.echo(text)


@main.command()
@click.option("--checkpoint", type=click.Path(exists=True), required=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--timeout-ms", type=float, default=5000.0, show_default=True)
@click.option("--manifest", type=click.Path(exists=True), default=None)
def serve(checkpoint, port, host, timeout_ms, manifest):
    """Serve the completion API over HTTP."""
    import uvicorn

    from .service import create_app

    app = create_app(checkpoint=checkpoint, manifest_path=manifest,
                     timeout_ms=timeout_ms)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
