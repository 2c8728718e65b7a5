"""Differentiable regressors over flattened time-series features.

Three families share one interface: an exact linear model (the reference
for the factor-loading correspondence of the sensitivity probe), a tanh
MLP, and a single-block attention regressor that reads 32 five-feature
tokens plus one learned query token whose output feeds a scalar head.

Every model is a flat float64 parameter vector plus an architecture
descriptor. ``predict`` is a plain numpy forward pass; ``traced_predict``
replays the same arithmetic on a :class:`tsadv.autodiff.Tape` so training
and attacks get exact gradients. Parameters are registered on the tape in
flat-vector order, which is what makes ``backward``'s concatenated
parameter gradient line up with ``theta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import Tape
from .errors import ConfigError, ParseError
from .rng import SplitMix64

LINEAR = "linear"
MLP = "mlp"
ATTN = "attn"
FAMILIES = (LINEAR, MLP, ATTN)


@dataclass(frozen=True)
class Arch:
    """Architecture descriptor; family-irrelevant fields are ignored."""

    input_dim: int
    hidden: tuple[int, ...] = (16,)  # MLP hidden widths
    width: int = 16                  # attention model width d
    heads: int = 1
    tokens: int = 32                 # time positions (query token added internally)
    features: int = 5


class Model:
    """Base regressor: flat theta + arch, deterministic forward."""

    family: str = ""

    def __init__(self, arch: Arch, theta: np.ndarray):
        theta = np.asarray(theta, dtype=np.float64)
        expected = sum(int(np.prod(s)) for _, s, _ in self.param_shapes_for(arch))
        if theta.shape != (expected,):
            raise ConfigError(
                f"{self.family} expects {expected} parameters, got {theta.shape}"
            )
        self.arch = arch
        self.theta = theta

    # Subclasses list (name, shape, fan_in) per parameter block, in flat
    # order. fan_in None means zero-initialized (biases, linear weights).
    @classmethod
    def param_shapes_for(cls, arch: Arch) -> list[tuple[str, tuple[int, ...], int | None]]:
        raise NotImplementedError

    def n_params(self) -> int:
        return self.theta.size

    def unpack(self) -> list[np.ndarray]:
        """Views of theta reshaped per block, in declaration order."""
        out = []
        offset = 0
        for _, shape, _ in self.param_shapes_for(self.arch):
            n = int(np.prod(shape))
            out.append(self.theta[offset : offset + n].reshape(shape))
            offset += n
        return out

    def clone_with(self, theta: np.ndarray) -> "Model":
        return type(self)(self.arch, theta)

    def _check_input(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.arch.input_dim,):
            raise ValueError(
                f"input shape {x.shape} does not match model dim {self.arch.input_dim}"
            )
        return x

    def register_params(self, tape: Tape) -> list[int]:
        """Add every parameter block as a tape leaf, in flat order."""
        return [tape.param_leaf(block) for block in self.unpack()]

    def predict(self, x) -> float:
        raise NotImplementedError

    def traced_predict(self, tape: Tape, x_node: int, params: list[int] | None = None) -> int:
        raise NotImplementedError


class LinearModel(Model):
    family = LINEAR

    @classmethod
    def param_shapes_for(cls, arch: Arch):
        return [("w", (arch.input_dim,), None), ("b", (), None)]

    def predict(self, x) -> float:
        x = self._check_input(x)
        w, b = self.unpack()
        return float(w @ x + b)

    def traced_predict(self, tape, x_node, params=None):
        if params is None:
            params = self.register_params(tape)
        w, b = params
        return tape.add(tape.matmul(w, x_node), b)


class MlpModel(Model):
    """Affine-tanh stack with a scalar affine head."""

    family = MLP

    @classmethod
    def param_shapes_for(cls, arch: Arch):
        if any(h < 1 for h in arch.hidden):
            raise ConfigError(f"hidden widths must be >= 1, got {arch.hidden}")
        shapes = []
        n_in = arch.input_dim
        for li, h in enumerate(arch.hidden):
            shapes.append((f"W{li}", (n_in, h), n_in))
            shapes.append((f"b{li}", (h,), None))
            n_in = h
        shapes.append(("w_out", (n_in,), n_in))
        shapes.append(("b_out", (), None))
        return shapes

    def predict(self, x) -> float:
        x = self._check_input(x)
        blocks = self.unpack()
        h = x
        for li in range(len(self.arch.hidden)):
            W, b = blocks[2 * li], blocks[2 * li + 1]
            h = np.tanh(h @ W + b)
        w_out, b_out = blocks[-2], blocks[-1]
        return float(h @ w_out + b_out)

    def traced_predict(self, tape, x_node, params=None):
        if params is None:
            params = self.register_params(tape)
        h = x_node
        for li in range(len(self.arch.hidden)):
            W, b = params[2 * li], params[2 * li + 1]
            h = tape.tanh(tape.add(tape.matmul(h, W), b))
        return tape.add(tape.matmul(h, params[-2]), params[-1])


class AttnModel(Model):
    """One self-attention block over 32 tokens plus a learned query token.

    The query token plays the role of a summary position: its five input
    values are trainable, and after attention plus a position-wise affine
    and tanh, its representation alone feeds the scalar head.
    """

    family = ATTN

    @classmethod
    def param_shapes_for(cls, arch: Arch):
        if arch.tokens * arch.features != arch.input_dim:
            raise ConfigError(
                f"tokens*features = {arch.tokens * arch.features} "
                f"does not match input_dim {arch.input_dim}"
            )
        if arch.width % arch.heads != 0:
            raise ConfigError(f"width {arch.width} not divisible by heads {arch.heads}")
        d, f = arch.width, arch.features
        return [
            ("query", (f,), f),
            ("Wp", (f, d), f),
            ("bp", (d,), None),
            ("Wq", (d, d), d),
            ("Wk", (d, d), d),
            ("Wv", (d, d), d),
            ("Wo", (d, d), d),
            ("bo", (d,), None),
            ("w_head", (d,), d),
            ("b_head", (), None),
        ]

    def _head_slices(self):
        d, nh = self.arch.width, self.arch.heads
        dh = d // nh
        return [slice(h * dh, (h + 1) * dh) for h in range(nh)], dh

    def predict(self, x) -> float:
        x = self._check_input(x)
        q, Wp, bp, Wq, Wk, Wv, Wo, bo, w_head, b_head = self.unpack()
        X = np.vstack([q[None, :], x.reshape(self.arch.tokens, self.arch.features)])
        H = X @ Wp + bp
        Q, K, V = H @ Wq, H @ Wk, H @ Wv
        slices, dh = self._head_slices()
        inv = 1.0 / math.sqrt(dh)
        C = np.zeros_like(H)
        for sl in slices:
            scores = (Q[:, sl] @ K[:, sl].T) * inv
            shifted = scores - np.max(scores, axis=1, keepdims=True)
            e = np.exp(shifted)
            A = e / np.sum(e, axis=1, keepdims=True)
            C[:, sl] = A @ V[:, sl]
        P = np.tanh(C @ Wo + bo)
        return float(P[0] @ w_head + b_head)

    def traced_predict(self, tape, x_node, params=None):
        if params is None:
            params = self.register_params(tape)
        q, Wp, bp, Wq, Wk, Wv, Wo, bo, w_head, b_head = params
        n_tok, f = self.arch.tokens, self.arch.features
        d = self.arch.width

        # Prepend the query token with constant selector matrices: row 0
        # receives q, rows 1..n receive the reshaped input tokens.
        sel_q = np.zeros((n_tok + 1, 1))
        sel_q[0, 0] = 1.0
        sel_x = np.zeros((n_tok + 1, n_tok))
        sel_x[1:, :] = np.eye(n_tok)
        X = tape.add(
            tape.matmul(tape.constant(sel_q), tape.reshape(q, (1, f))),
            tape.matmul(tape.constant(sel_x), tape.reshape(x_node, (n_tok, f))),
        )

        H = tape.add(tape.matmul(X, Wp), bp)
        Q = tape.matmul(H, Wq)
        K = tape.matmul(H, Wk)
        V = tape.matmul(H, Wv)

        slices, dh = self._head_slices()
        inv = tape.constant(1.0 / math.sqrt(dh))
        C = None
        for sl in slices:
            pick = np.zeros((d, dh))
            pick[sl, :] = np.eye(dh)
            pick_node = tape.constant(pick)
            Qh = tape.matmul(Q, pick_node)
            Kh = tape.matmul(K, pick_node)
            Vh = tape.matmul(V, pick_node)
            A = tape.softmax_rows(tape.mul(tape.matmul(Qh, tape.transpose(Kh)), inv))
            Ch = tape.matmul(tape.matmul(A, Vh), tape.constant(pick.T))
            C = Ch if C is None else tape.add(C, Ch)

        P = tape.tanh(tape.add(tape.matmul(C, Wo), bo))
        row0 = np.zeros(n_tok + 1)
        row0[0] = 1.0
        summary = tape.matmul(tape.constant(row0), P)
        return tape.add(tape.matmul(summary, w_head), b_head)


_FAMILY_CLASSES = {LINEAR: LinearModel, MLP: MlpModel, ATTN: AttnModel}


def init_model(family: str, arch: Arch, seed: int) -> Model:
    """Seeded parameter initialization.

    Linear starts at zero. MLP/attention weight blocks draw uniform from
    [-s, s] with s = 1/sqrt(fan_in); biases start at zero.
    """
    if family not in _FAMILY_CLASSES:
        raise ConfigError(f"unknown model family {family!r}")
    cls = _FAMILY_CLASSES[family]
    stream = SplitMix64(seed).child("model-init")
    parts = []
    for _, shape, fan_in in cls.param_shapes_for(arch):
        n = int(np.prod(shape))
        if fan_in is None:
            parts.append(np.zeros(n, dtype=np.float64))
        else:
            s = 1.0 / math.sqrt(fan_in)
            parts.append(stream.uniforms(n, -s, s))
    theta = np.concatenate(parts) if parts else np.zeros(0)
    return cls(arch, theta)


def save_model(model: Model, path) -> None:
    """Flat text checkpoint: a header line, then one parameter per line.

    Floats are written with ``repr`` so the round-trip is bit-faithful.
    """
    arch = model.arch
    if model.family == LINEAR:
        header = f"linear k={arch.input_dim}"
    elif model.family == MLP:
        header = f"mlp k={arch.input_dim} hidden={','.join(map(str, arch.hidden))}"
    else:
        header = (
            f"attn k={arch.input_dim} width={arch.width} heads={arch.heads} "
            f"tokens={arch.tokens} features={arch.features}"
        )
    with open(path, "w", encoding="utf-8") as f:
        f.write(header + "\n")
        for v in model.theta:
            f.write(repr(float(v)) + "\n")


def load_model(path) -> Model:
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines:
        raise ParseError(f"{path}: empty checkpoint")
    fields = lines[0].split()
    family = fields[0]
    if family not in _FAMILY_CLASSES:
        raise ParseError(f"{path}: line 1: unknown family {family!r}")
    kv = {}
    for tok in fields[1:]:
        if "=" not in tok:
            raise ParseError(f"{path}: line 1: malformed header field {tok!r}")
        key, val = tok.split("=", 1)
        kv[key] = val
    try:
        k = int(kv["k"])
        if family == MLP:
            hidden = tuple(int(h) for h in kv["hidden"].split(",") if h)
            arch = Arch(input_dim=k, hidden=hidden)
        elif family == ATTN:
            arch = Arch(
                input_dim=k,
                width=int(kv["width"]),
                heads=int(kv["heads"]),
                tokens=int(kv["tokens"]),
                features=int(kv["features"]),
            )
        else:
            arch = Arch(input_dim=k)
    except (KeyError, ValueError) as exc:
        raise ParseError(f"{path}: line 1: bad header ({exc})") from exc
    theta = np.empty(len(lines) - 1, dtype=np.float64)
    for i, line in enumerate(lines[1:], start=2):
        try:
            theta[i - 2] = float(line)
        except ValueError as exc:
            raise ParseError(f"{path}: line {i}: not a number: {line!r}") from exc
    return _FAMILY_CLASSES[family](arch, theta)
