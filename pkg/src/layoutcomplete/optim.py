"""Adam with bias correction, plus the warmup / inverse-sqrt schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import Array, ShapeMismatch, Tensor


@dataclass
class AdamState:
    """First/second moment estimates and the step counter."""

    m: list[Array]
    v: list[Array]
    t: int = 0

    @classmethod
    def for_params(cls, params: list[Tensor]) -> "AdamState":
        return cls(
            m=[np.zeros_like(p.data) for p in params],
            v=[np.zeros_like(p.data) for p in params],
        )


def adam_step(params: list[Tensor], grads: list[Array], state: AdamState,
              lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> None:
    """One in-place Adam update. Deterministic given identical inputs."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeMismatch("params/grads/state lengths differ")
    state.t += 1
    bc1 = 1.0 - beta1 ** state.t
    bc2 = 1.0 - beta2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g.shape != p.data.shape:
            raise ShapeMismatch(f"grad {g.shape} vs param {p.data.shape}")
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        m_hat = m / bc1
        v_hat = v / bc2
        p.data -= (lr * m_hat / (np.sqrt(v_hat) + eps)).astype(p.data.dtype)


def warmup_inv_sqrt_lr(step: int, peak: float, warmup: int = 200) -> float:
    """Linear warmup to `peak` over `warmup` steps, then decay as
    sqrt(warmup/step)."""
    if step < 1:
        raise ValueError("step starts at 1")
    if step <= warmup:
        return peak * step / warmup
    return peak * math.sqrt(warmup / step)


def clip_global_norm(grads: list[Array], max_norm: float) -> float:
    """Scale all grads in place so their joint L2 norm is <= max_norm.
    Returns the pre-clip norm."""
    total = math.sqrt(sum(float((g * g).sum()) for g in grads))
    if max_norm > 0 and total > max_norm:
        factor = max_norm / total
        for g in grads:
            g *= factor
    return total
