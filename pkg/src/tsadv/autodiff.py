"""Minimal reverse-mode differentiation on a linear tape.

A scalar-valued computation is recorded as primitive nodes appended in
execution order, so the node list is topologically sorted by construction.
One backward sweep accumulates adjoints for every recorded node and yields
the gradient with respect to the traced input vector and every parameter
leaf in a single pass -- the training loop needs both per batch, the attack
loop needs the input side.

Primitives: add / sub / mul (elementwise, numpy broadcasting), matmul
(vector-vector, vector-matrix, matrix-vector, matrix-matrix), transpose,
reshape, tanh, row-softmax, square, mean. Constants join the forward
computation but receive no adjoints. A tape is single-use per computation
but ``backward`` may be called repeatedly; it keeps its adjoint storage
local, so repeated calls return identical results.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class _Node:
    op: str
    value: np.ndarray
    parents: tuple[int, ...]
    needs_grad: bool
    aux: object = None


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum out broadcast axes so grad matches the original operand shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad


class Tape:
    """Execution trace of one scalar loss; node handles are plain ints."""

    def __init__(self):
        self.nodes: list[_Node] = []
        self.input_index: int | None = None
        self.param_indices: list[int] = []
        self.prediction_index: int | None = None
        self.output_index: int | None = None

    # -- leaves ----------------------------------------------------------

    def _leaf(self, value, needs_grad: bool) -> int:
        v = np.asarray(value, dtype=np.float64)
        self.nodes.append(_Node("leaf", v, (), needs_grad))
        return len(self.nodes) - 1

    def input_leaf(self, value) -> int:
        if self.input_index is not None:
            raise RuntimeError("tape already has an input leaf")
        self.input_index = self._leaf(value, True)
        return self.input_index

    def param_leaf(self, value) -> int:
        idx = self._leaf(value, True)
        self.param_indices.append(idx)
        return idx

    def constant(self, value) -> int:
        return self._leaf(value, False)

    # -- primitives ------------------------------------------------------

    def _push(self, op: str, value: np.ndarray, parents: tuple[int, ...], aux=None) -> int:
        needs = any(self.nodes[p].needs_grad for p in parents)
        self.nodes.append(_Node(op, np.asarray(value, dtype=np.float64), parents, needs, aux))
        return len(self.nodes) - 1

    def value(self, i: int) -> np.ndarray:
        return self.nodes[i].value

    def add(self, a: int, b: int) -> int:
        return self._push("add", self.nodes[a].value + self.nodes[b].value, (a, b))

    def sub(self, a: int, b: int) -> int:
        return self._push("sub", self.nodes[a].value - self.nodes[b].value, (a, b))

    def mul(self, a: int, b: int) -> int:
        return self._push("mul", self.nodes[a].value * self.nodes[b].value, (a, b))

    def matmul(self, a: int, b: int) -> int:
        return self._push("matmul", self.nodes[a].value @ self.nodes[b].value, (a, b))

    def transpose(self, a: int) -> int:
        return self._push("transpose", self.nodes[a].value.T, (a,))

    def reshape(self, a: int, shape: tuple[int, ...]) -> int:
        return self._push("reshape", self.nodes[a].value.reshape(shape), (a,), aux=self.nodes[a].value.shape)

    def tanh(self, a: int) -> int:
        return self._push("tanh", np.tanh(self.nodes[a].value), (a,))

    def softmax_rows(self, a: int) -> int:
        v = self.nodes[a].value
        if v.ndim != 2:
            raise ValueError("softmax_rows expects a 2-d array")
        shifted = v - np.max(v, axis=1, keepdims=True)
        e = np.exp(shifted)
        return self._push("softmax_rows", e / np.sum(e, axis=1, keepdims=True), (a,))

    def square(self, a: int) -> int:
        v = self.nodes[a].value
        return self._push("square", v * v, (a,))

    def mean(self, a: int) -> int:
        return self._push("mean", np.mean(self.nodes[a].value), (a,))

    def mark_output(self, i: int) -> None:
        if self.nodes[i].value.shape != ():
            raise ValueError("output must be a scalar")
        self.output_index = i

    # -- backward --------------------------------------------------------

    def run_backward(self) -> list[np.ndarray | None]:
        """Adjoint per node (None where no gradient flows)."""
        if self.output_index is None:
            raise RuntimeError("no output marked on this tape")
        adj: list[np.ndarray | None] = [None] * len(self.nodes)
        adj[self.output_index] = np.ones((), dtype=np.float64)
        for idx in range(len(self.nodes) - 1, -1, -1):
            node = self.nodes[idx]
            g = adj[idx]
            if g is None or node.op == "leaf" or not node.needs_grad:
                continue
            for p, pg in self._parent_grads(node, g):
                if not self.nodes[p].needs_grad:
                    continue
                adj[p] = pg if adj[p] is None else adj[p] + pg
        return adj

    def _parent_grads(self, node: _Node, g: np.ndarray):
        op = node.op
        ps = node.parents
        if op == "add":
            a, b = (self.nodes[p].value for p in ps)
            yield ps[0], _unbroadcast(g, a.shape)
            yield ps[1], _unbroadcast(g, b.shape)
        elif op == "sub":
            a, b = (self.nodes[p].value for p in ps)
            yield ps[0], _unbroadcast(g, a.shape)
            yield ps[1], _unbroadcast(-g, b.shape)
        elif op == "mul":
            a, b = (self.nodes[p].value for p in ps)
            yield ps[0], _unbroadcast(g * b, a.shape)
            yield ps[1], _unbroadcast(g * a, b.shape)
        elif op == "matmul":
            a, b = (self.nodes[p].value for p in ps)
            if a.ndim == 1 and b.ndim == 1:
                yield ps[0], g * b
                yield ps[1], g * a
            elif a.ndim == 1:
                yield ps[0], b @ g
                yield ps[1], np.outer(a, g)
            elif b.ndim == 1:
                yield ps[0], np.outer(g, b)
                yield ps[1], a.T @ g
            else:
                yield ps[0], g @ b.T
                yield ps[1], a.T @ g
        elif op == "transpose":
            yield ps[0], g.T
        elif op == "reshape":
            yield ps[0], g.reshape(node.aux)
        elif op == "tanh":
            yield ps[0], g * (1.0 - node.value * node.value)
        elif op == "softmax_rows":
            s = node.value
            yield ps[0], s * (g - np.sum(g * s, axis=1, keepdims=True))
        elif op == "square":
            yield ps[0], g * 2.0 * self.nodes[ps[0]].value
        elif op == "mean":
            a = self.nodes[ps[0]].value
            yield ps[0], np.full(a.shape, float(g) / a.size)
        else:  # pragma: no cover
            raise NotImplementedError(op)


@dataclass
class GradientPair:
    """Gradients of the traced scalar loss."""

    grad_input: np.ndarray
    grad_params: np.ndarray


def forward_loss(model, x, y: float) -> tuple[float, Tape]:
    """Squared-error loss ``(f(x) - y)**2`` recorded on a fresh tape."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.arch.input_dim,):
        raise ValueError(f"input shape {x.shape} does not match model dim {model.arch.input_dim}")
    tape = Tape()
    xi = tape.input_leaf(x)
    yhat = model.traced_predict(tape, xi)
    tape.prediction_index = yhat
    resid = tape.sub(yhat, tape.constant(np.float64(y)))
    loss = tape.square(resid)
    tape.mark_output(loss)
    return float(tape.value(loss)), tape


def backward(tape: Tape) -> GradientPair:
    """Exact reverse-mode gradients of the loss recorded on the tape."""
    adj = tape.run_backward()

    def _adj_of(idx: int) -> np.ndarray:
        a = adj[idx]
        return np.zeros_like(tape.nodes[idx].value) if a is None else a

    if tape.input_index is None:
        raise RuntimeError("tape has no input leaf")
    grad_input = _adj_of(tape.input_index)
    if tape.param_indices:
        grad_params = np.concatenate([_adj_of(i).ravel() for i in tape.param_indices])
    else:
        grad_params = np.zeros(0, dtype=np.float64)
    return GradientPair(grad_input, grad_params)
