"""Finite-difference gradient checking."""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from gounsafe.autodiff.core import Tape, Tensor, backward


def numeric_grad(f: Callable[[], Tensor], p: Tensor, h: float = 1e-5) -> np.ndarray:
    """Central differences of scalar ``f()`` with respect to ``p``."""
    g = np.zeros_like(p.data)
    flat = p.data.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        up = float(f().data)
        flat[i] = old - h
        down = float(f().data)
        flat[i] = old
        gf[i] = (up - down) / (2 * h)
    return g


def relative_error(a: np.ndarray, n: np.ndarray, floor: float = 1e-6) -> float:
    """max|a - n| scaled by the largest magnitude of either gradient.

    ``floor`` keeps identically-zero gradients from amplifying finite-difference noise.
    """
    scale = max(np.abs(a).max(initial=0.0), np.abs(n).max(initial=0.0), floor)
    return float(np.abs(a - n).max(initial=0.0) / scale)


def gradient_check(f: Callable[[], Tensor], params: Sequence[Tensor], h: float = 1e-5) -> float:
    """Largest relative error between reverse-mode and numeric gradients."""
    with Tape() as tape:
        loss = f()
    analytic = backward(loss, params, tape)
    worst = 0.0
    for p, a in zip(params, analytic):
        worst = max(worst, relative_error(a, numeric_grad(f, p, h)))
    return worst
