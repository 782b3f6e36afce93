"""Tensors, the recording tape and reverse-mode gradient propagation."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from gounsafe.errors import NonScalarLoss


class Tensor:
    """A float64 array that may take part in differentiation."""

    __slots__ = ("data", "requires_grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: str = ""):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        g = ", grad" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{g})"

    # operator sugar; the functions live in ops
    def __add__(self, other):
        from gounsafe.autodiff.ops import add
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from gounsafe.autodiff.ops import sub
        return sub(self, other)

    def __mul__(self, other):
        from gounsafe.autodiff.ops import mul
        return mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        from gounsafe.autodiff.ops import matmul
        return matmul(self, other)

    def __neg__(self):
        from gounsafe.autodiff.ops import mul
        return mul(self, -1.0)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


@dataclass
class _Node:
    out: Tensor
    inputs: tuple[Tensor, ...]
    vjp: Callable[[np.ndarray], Sequence[np.ndarray | None]]


class Tape:
    """Records primitive ops in creation order while active (``with Tape():``)."""

    _stack: list[Tape] = []

    def __init__(self):
        self.nodes: list[_Node] = []

    def __enter__(self) -> Tape:
        Tape._stack.append(self)
        return self

    def __exit__(self, *exc) -> None:
        Tape._stack.pop()

    @classmethod
    def current(cls) -> Tape | None:
        return cls._stack[-1] if cls._stack else None

    def backward(self, loss: Tensor, params: Sequence[Tensor]) -> list[np.ndarray]:
        return backward(loss, params, self)


def record(out_data: np.ndarray, inputs: Sequence[Tensor], vjp) -> Tensor:
    """Wrap an op result and put it on the active tape if any input needs a gradient."""
    needs = any(t.requires_grad for t in inputs)
    out = Tensor(out_data, requires_grad=needs)
    tape = Tape.current()
    if needs and tape is not None:
        tape.nodes.append(_Node(out, tuple(inputs), vjp))
    return out


def backward(loss: Tensor, params: Sequence[Tensor], tape: Tape | None = None) -> list[np.ndarray]:
    """Gradients of a scalar ``loss`` for each of ``params`` (zeros if unreached)."""
    if loss.data.size != 1:
        raise NonScalarLoss(f"loss must be scalar, got shape {loss.shape}")
    tape = tape or Tape.current()
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    if tape is not None:
        # nodes were recorded in creation order, which is topological
        for node in reversed(tape.nodes):
            g = grads.pop(id(node.out), None)
            if g is None:
                continue
            for inp, gi in zip(node.inputs, node.vjp(g)):
                if gi is None or not inp.requires_grad:
                    continue
                key = id(inp)
                if key in grads:
                    grads[key] = grads[key] + gi
                else:
                    grads[key] = gi
    return [grads.get(id(p), np.zeros_like(p.data)) for p in params]
