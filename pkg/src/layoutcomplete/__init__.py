"""Layout auto-completion: tree decoders, metrics, harness, service."""

__version__ = "0.1.0"

from .layout import (  # noqa: F401
    GRID_H,
    GRID_W,
    LayoutNode,
    LayoutTree,
    PartialTree,
    delinearize,
    discretize_bounds,
    extract_partial,
    linearize,
    traverse,
    validate_tree,
)
