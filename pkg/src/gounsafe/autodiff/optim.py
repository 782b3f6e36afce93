"""Adam with bias correction."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from gounsafe.autodiff.core import Tensor
from gounsafe.errors import ShapeMismatch


@dataclass
class OptimizerState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: Sequence[Tensor], lr: float = 0.001) -> OptimizerState:
        return cls([np.zeros_like(p.data) for p in params],
                   [np.zeros_like(p.data) for p in params], lr=lr)


def adam_step(state: OptimizerState, params: Sequence[Tensor], grads: Sequence[np.ndarray]) -> None:
    """One in-place update of ``params``; increments ``state.step``."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeMismatch(f"{len(params)} params, {len(grads)} grads, {len(state.m)} moments")
    for p, g in zip(params, grads):
        if p.data.shape != np.shape(g):
            raise ShapeMismatch(f"gradient {np.shape(g)} for parameter {p.data.shape}")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1, c2 = 1.0 - b1 ** t, 1.0 - b2 ** t
    for i, (p, g) in enumerate(zip(params, grads)):
        state.m[i] = b1 * state.m[i] + (1 - b1) * g
        state.v[i] = b2 * state.v[i] + (1 - b2) * (g * g)
        mhat = state.m[i] / c1
        vhat = state.v[i] / c2
        p.data -= state.lr * mhat / (np.sqrt(vhat) + state.eps)


@dataclass
class Adam:
    params: list[Tensor]
    lr: float = 0.001
    state: OptimizerState = field(init=False)

    def __post_init__(self) -> None:
        self.state = OptimizerState.for_params(self.params, self.lr)

    def step(self, grads: Sequence[np.ndarray]) -> None:
        adam_step(self.state, self.params, grads)
