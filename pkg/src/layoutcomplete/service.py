"""HTTP completion service for the designer canvas.

One checkpoint per process, loaded at startup; requests never mutate
server state, so any number of concurrent completions may share the
model snapshot. Wire trees use grid units and manifest type names.
"""

from __future__ import annotations

import threading
import time
from contextlib import asynccontextmanager
from pathlib import Path
from typing import Literal

from fastapi import FastAPI, HTTPException
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .checkpoint import file_sha256
from .corpus import load_manifest
from .decoding import DecodeConfig, DecodeTimeout, PrefixViolation, complete
from .layout import (
    LayoutNode,
    LayoutTree,
    PartialTree,
    ValidationError,
    child_table,
    validate_tree,
)
from .models import load_model


class WireNode(BaseModel):
    type: str
    bounds: tuple[int, int, int, int]
    terminal: bool = True
    children: list["WireNode"] = Field(default_factory=list)


class CompleteRequest(BaseModel):
    root: WireNode
    order: Literal["bfs", "dfs"] = "dfs"
    numCandidates: int = Field(default=1, ge=1, le=5)
    strategy: Literal["greedy", "beam"] = "greedy"
    beamWidth: int = Field(default=1, ge=1, le=8)


class PredictedNode(BaseModel):
    type: str
    bounds: tuple[int, int, int, int]
    terminal: bool
    predicted: bool
    children: list["PredictedNode"] = Field(default_factory=list)


class CandidateOut(BaseModel):
    root: PredictedNode
    logProb: float
    newNodeCount: int
    budgetExhausted: bool


class ModelInfo(BaseModel):
    variant: str
    checkpointHash: str
    gridWidth: int
    gridHeight: int
    typeCount: int
    layers: int
    hiddenDim: int


class CompleteResponse(BaseModel):
    candidates: list[CandidateOut]
    modelInfo: ModelInfo
    timingMs: float


def wire_to_partial(root: WireNode, type_ids: dict[str, int]) -> PartialTree:
    """Flatten a nested wire tree to canonical preorder storage.

    Raises HTTPException(400) with a field path on any domain error.
    """
    nodes: list[LayoutNode] = []

    def walk(wn: WireNode, parent: int | None, path: str) -> None:
        if wn.type not in type_ids:
            raise HTTPException(400, f"{path}.type: unknown type {wn.type!r}")
        if wn.terminal and wn.children:
            raise HTTPException(400, f"{path}: terminal node has children")
        idx = len(nodes)
        depth = 0 if parent is None else nodes[parent].depth + 1
        nodes.append(LayoutNode(type_ids[wn.type], wn.terminal,
                                tuple(wn.bounds), parent, depth))
        for i, child in enumerate(wn.children):
            walk(child, idx, f"{path}.children[{i}]")

    walk(root, None, "root")
    tree = PartialTree(tuple(nodes), "request", k=len(nodes))
    try:
        validate_tree(tree)
    except ValidationError as exc:
        raise HTTPException(400, f"root: {exc}") from exc
    return tree


def tree_to_wire(tree: LayoutTree, manifest: list[str],
                 new_flags: tuple[bool, ...]) -> PredictedNode:
    table = child_table(tree)

    def build(i: int) -> PredictedNode:
        node = tree.nodes[i]
        return PredictedNode(
            type=manifest[node.type_id],
            bounds=node.bounds,
            terminal=node.terminal,
            predicted=new_flags[i],
            children=[build(c) for c in table[i]],
        )

    return build(0)


def create_app(checkpoint: str | Path | None = None,
               manifest_path: str | Path | None = None,
               timeout_ms: float = 5000.0,
               max_inflight: int = 8) -> FastAPI:
    state = {"model": None, "hash": "", "manifest": None, "type_ids": None}
    inflight = {"n": 0}
    lock = threading.Lock()

    def load() -> None:
        manifest = load_manifest(manifest_path)
        model, _ = load_model(checkpoint)
        state["manifest"] = manifest
        state["type_ids"] = {name: i for i, name in enumerate(manifest)}
        state["hash"] = file_sha256(checkpoint)
        state["model"] = model

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        if checkpoint is not None:
            load()
        yield

    app = FastAPI(title="layout completion service", lifespan=lifespan)

    @app.exception_handler(RequestValidationError)
    async def malformed(request, exc):
        # malformed bodies are client errors, not unprocessable entities
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    def require_model():
        if state["model"] is None:
            raise HTTPException(503, "model not loaded")
        return state["model"]

    @app.get("/healthz")
    def healthz():
        require_model()
        return {"status": "ok"}

    @app.get("/model")
    def model_info():
        model = require_model()
        cfg = model.cfg
        return ModelInfo(
            variant=cfg.variant,
            checkpointHash=state["hash"],
            gridWidth=cfg.grid_w,
            gridHeight=cfg.grid_h,
            typeCount=cfg.type_count,
            layers=cfg.layers,
            hiddenDim=cfg.hidden_dim,
        )

    @app.post("/complete", response_model=CompleteResponse)
    def complete_endpoint(req: CompleteRequest) -> CompleteResponse:
        model = require_model()
        with lock:
            if inflight["n"] >= max_inflight:
                raise HTTPException(503, "overloaded")
            inflight["n"] += 1
        started = time.monotonic()
        try:
            partial = wire_to_partial(req.root, state["type_ids"])
            if model.variant == "vanilla" and req.order == "bfs":
                raise PrefixViolation(
                    "this checkpoint completes depth-first prefixes only")
            width = req.beamWidth if req.strategy == "beam" else 1
            cfg = DecodeConfig(strategy=req.strategy,
                               beam_width=max(width, req.numCandidates)
                               if req.strategy == "beam" else 1)
            completions = complete(model, partial, cfg, order=req.order,
                                   timeout_s=timeout_ms / 1000.0)
        except PrefixViolation as exc:
            raise HTTPException(422, str(exc)) from exc
        except DecodeTimeout as exc:
            raise HTTPException(503, str(exc)) from exc
        finally:
            with lock:
                inflight["n"] -= 1
        candidates = [
            CandidateOut(
                root=tree_to_wire(c.tree, state["manifest"], c.new_flags),
                logProb=c.log_prob,
                newNodeCount=c.new_node_count,
                budgetExhausted=c.budget_exhausted,
            )
            for c in completions[: req.numCandidates]
        ]
        return CompleteResponse(
            candidates=candidates,
            modelInfo=model_info(),
            timingMs=(time.monotonic() - started) * 1000.0,
        )

    return app
