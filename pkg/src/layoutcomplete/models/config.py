"""Model configuration: one JSON file describes one decoder."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

from ..layout import GRID_H, GRID_W

VARIANTS = ("vanilla", "pointer", "recursive")


@dataclass(frozen=True)
class ModelConfig:
    variant: str
    embed_dim: int = 64
    hidden_dim: int = 64
    layers: int = 2
    heads: int = 4
    ffn_dim: int = 256
    dropout: float = 0.0
    seed: int = 0
    type_count: int = 25
    grid_w: int = GRID_W
    grid_h: int = GRID_H

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.embed_dim % 4:
            raise ValueError("embed_dim must be divisible by 4 (coordinate blocks)")
        if self.hidden_dim != self.embed_dim:
            # node embeddings feed the stack directly as layer-0 states
            raise ValueError("hidden_dim must equal embed_dim")
        if self.hidden_dim % self.heads:
            raise ValueError("heads must divide hidden_dim")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must be in [0, 1)")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, doc: dict) -> "ModelConfig":
        return cls(**doc)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2))

    @classmethod
    def load(cls, path: str | Path) -> "ModelConfig":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class Vocab:
    """Shared token vocabulary layout.

    The type axis holds the manifest categories plus OPEN / CLOSE / EOS
    (predictable) and PAD (embeddable only). Coordinates are inclusive
    of the grid's far edge, hence grid+1 rows. Terminal has a third
    "not applicable" row for the special tokens.
    """

    types: int
    grid_w: int
    grid_h: int

    @property
    def open_id(self) -> int:
        return self.types

    @property
    def close_id(self) -> int:
        return self.types + 1

    @property
    def eos_id(self) -> int:
        return self.types + 2

    @property
    def pad_id(self) -> int:
        return self.types + 3

    @property
    def c_rows(self) -> int:
        return self.types + 4

    @property
    def c_classes(self) -> int:
        return self.types + 3

    @property
    def t_na(self) -> int:
        return 2

    @property
    def t_rows(self) -> int:
        return 3

    @property
    def x_rows(self) -> int:
        return self.grid_w + 1

    @property
    def y_rows(self) -> int:
        return self.grid_h + 1

    @classmethod
    def for_config(cls, cfg: ModelConfig) -> "Vocab":
        return cls(cfg.type_count, cfg.grid_w, cfg.grid_h)
