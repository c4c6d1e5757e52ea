"""Neural network layers built directly on numpy.

Conventions shared by every layer:

  * float64 parameters, activations, and gradients;
  * weights initialize uniform in (-k, k) with k = 1/sqrt(fan_in), biases
    start at zero (the LSTM forget gate starts at 1.0 instead);
  * forward(train=True) caches what backward needs; backward consumes the
    cache, accumulates into Param.grad, and returns the input gradient;
  * backward without a cached forward raises NoForwardRecorded.

Layers accept a single example (1-D input, or (T, D) for the recurrent
layer) or a leading batch axis; gradients accumulate until zero_grad().
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimMismatch,
    LabelOutOfRange,
    NoForwardRecorded,
)

ACTIVATIONS = ("none", "relu", "tanh", "softmax")


@dataclass
class Param:
    """A named tensor with its accumulated gradient."""

    name: str
    value: np.ndarray
    grad: np.ndarray

    @classmethod
    def of(cls, name: str, value: np.ndarray) -> "Param":
        value = np.asarray(value, dtype=np.float64)
        return cls(name=name, value=value, grad=np.zeros_like(value))


def uniform_init(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    k = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-k, k, size=shape)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # exp(-logaddexp(0, -x)) stays finite for any input magnitude
    return np.exp(-np.logaddexp(0.0, -x))


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


class Linear:
    """y = activation(x @ W + b) with W shaped (in_dim, out_dim)."""

    def __init__(
        self,
        in_dim: int,
        out_dim: int,
        activation: str = "none",
        *,
        rng: np.random.Generator,
        name: str = "linear",
    ):
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.activation = activation
        self.weight = Param.of(f"{name}.weight", uniform_init(rng, (in_dim, out_dim), in_dim))
        self.bias = Param.of(f"{name}.bias", np.zeros(out_dim))
        self._cache = None

    def params(self) -> list[Param]:
        return [self.weight, self.bias]

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        x2 = x[None, :] if single else x
        if x2.ndim != 2 or x2.shape[1] != self.in_dim:
            raise DimMismatch(
                f"{self.weight.name}: input width {x2.shape[-1]}, expected {self.in_dim}"
            )
        z = x2 @ self.weight.value + self.bias.value
        if self.activation == "relu":
            y = np.maximum(z, 0.0)
        elif self.activation == "tanh":
            y = np.tanh(z)
        elif self.activation == "softmax":
            y = softmax(z, axis=1)
        else:
            y = z
        self._cache = (x2, y, single)
        return y[0] if single else y

    def backward(self, dy: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise NoForwardRecorded(f"{self.weight.name}: no forward pass cached")
        x2, y, single = self._cache
        self._cache = None
        dy = np.asarray(dy, dtype=np.float64)
        dy2 = dy[None, :] if single else dy
        if dy2.shape != y.shape:
            raise DimMismatch(
                f"{self.weight.name}: grad shape {dy2.shape}, output was {y.shape}"
            )
        if self.activation == "relu":
            dz = dy2 * (y > 0.0)
        elif self.activation == "tanh":
            dz = dy2 * (1.0 - y * y)
        elif self.activation == "softmax":
            dz = y * (dy2 - (dy2 * y).sum(axis=1, keepdims=True))
        else:
            dz = dy2
        self.weight.grad += x2.T @ dz
        self.bias.grad += dz.sum(axis=0)
        dx = dz @ self.weight.value.T
        return dx[0] if single else dx


class Dropout:
    """Inverted dropout: train-time mask scaled by 1/(1-rate), identity in eval."""

    def __init__(self, rate: float):
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate {rate} outside [0, 1)")
        self.rate = rate
        self._mask = None
        self._seen_forward = False

    def forward(
        self, x: np.ndarray, train: bool = False, rng: np.random.Generator | None = None
    ) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        self._seen_forward = True
        if not train or self.rate == 0.0:
            self._mask = None
            return x
        if rng is None:
            raise ValueError("training-mode dropout needs an rng")
        keep = rng.random(x.shape) >= self.rate
        self._mask = keep / (1.0 - self.rate)
        return x * self._mask

    def backward(self, dy: np.ndarray) -> np.ndarray:
        if not self._seen_forward:
            raise NoForwardRecorded("dropout: no forward pass cached")
        self._seen_forward = False
        dy = np.asarray(dy, dtype=np.float64)
        if self._mask is None:
            return dy
        mask = self._mask
        self._mask = None
        return dy * mask


class BiLstm:
    """Bidirectional single-layer LSTM over (T, D) or (B, T, D) input.

    Gate order along the 4H axis is [input, forget, cell, output]; gates use
    the logistic sigmoid, cell and output use tanh. Output concatenates the
    forward and backward hidden sequences to (..., T, 2H), so the forward
    pass's final states are out[..., -1, :H] and out[..., 0, H:] (also
    returned directly). The forget-gate bias starts at 1.0 so early training
    retains memory.
    """

    def __init__(self, input_dim: int, hidden_dim: int, *, rng: np.random.Generator, name: str = "bilstm"):
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self._params = {}
        for direction in ("fwd", "bwd"):
            w_x = uniform_init(rng, (input_dim, 4 * hidden_dim), input_dim)
            w_h = uniform_init(rng, (hidden_dim, 4 * hidden_dim), hidden_dim)
            bias = np.zeros(4 * hidden_dim)
            bias[hidden_dim : 2 * hidden_dim] = 1.0
            self._params[direction] = (
                Param.of(f"{name}.{direction}.w_x", w_x),
                Param.of(f"{name}.{direction}.w_h", w_h),
                Param.of(f"{name}.{direction}.bias", bias),
            )
        self._cache = None

    def params(self) -> list[Param]:
        return [p for direction in ("fwd", "bwd") for p in self._params[direction]]

    def _run_direction(self, x: np.ndarray, direction: str):
        """x is (B, T, D); processes reversed time for the backward direction.
        Returns hidden states in processing order plus the backward stash."""
        w_x, w_h, bias = self._params[direction]
        batch, steps, _ = x.shape
        hidden = self.hidden_dim
        pre = (x.reshape(-1, self.input_dim) @ w_x.value + bias.value).reshape(
            batch, steps, 4 * hidden
        )
        pre = np.ascontiguousarray(pre.transpose(1, 0, 2))
        if direction == "bwd":
            pre = pre[::-1]

        shape = (steps, batch, hidden)
        gates_i = np.empty(shape)
        gates_f = np.empty(shape)
        gates_g = np.empty(shape)
        gates_o = np.empty(shape)
        cells = np.empty(shape)
        hiddens = np.empty(shape)
        h = np.zeros((batch, hidden))
        c = np.zeros((batch, hidden))
        w_h_val = w_h.value
        for t in range(steps):
            z = pre[t] + h @ w_h_val
            gi = _sigmoid(z[:, :hidden])
            gf = _sigmoid(z[:, hidden : 2 * hidden])
            gg = np.tanh(z[:, 2 * hidden : 3 * hidden])
            go = _sigmoid(z[:, 3 * hidden :])
            c = gf * c + gi * gg
            h = go * np.tanh(c)
            gates_i[t] = gi
            gates_f[t] = gf
            gates_g[t] = gg
            gates_o[t] = go
            cells[t] = c
            hiddens[t] = h
        stash = (gates_i, gates_f, gates_g, gates_o, cells, hiddens)
        return hiddens, stash

    def forward(self, x: np.ndarray, train: bool = False):
        """Returns (output, (final_fwd, final_bwd)). Output is (..., T, 2H)."""
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 2
        x3 = x[None] if single else x
        if x3.ndim != 3 or x3.shape[2] != self.input_dim:
            raise DimMismatch(
                f"bilstm: input shape {x.shape}, expected (..., T, {self.input_dim})"
            )
        hs_f, stash_f = self._run_direction(x3, "fwd")
        hs_b, stash_b = self._run_direction(x3, "bwd")
        out = np.concatenate(
            [hs_f.transpose(1, 0, 2), hs_b[::-1].transpose(1, 0, 2)], axis=2
        )
        self._cache = (x3, stash_f, stash_b, single)
        finals = (out[:, -1, : self.hidden_dim], out[:, 0, self.hidden_dim :])
        if single:
            return out[0], (finals[0][0], finals[1][0])
        return out, finals

    def _backprop_direction(self, x: np.ndarray, dhs: np.ndarray, direction: str, stash):
        """dhs is the hidden-state gradient in processing order (T, B, H)."""
        w_x, w_h, bias = self._params[direction]
        gates_i, gates_f, gates_g, gates_o, cells, hiddens = stash
        steps, batch, hidden = dhs.shape

        dz_all = np.empty((steps, batch, 4 * hidden))
        w_h_t = w_h.value.T
        dh_next = np.zeros((batch, hidden))
        dc_next = np.zeros((batch, hidden))
        for t in range(steps - 1, -1, -1):
            dh = dhs[t] + dh_next
            tanh_c = np.tanh(cells[t])
            d_out = dh * tanh_c
            dc = dh * gates_o[t] * (1.0 - tanh_c * tanh_c) + dc_next
            d_in = dc * gates_g[t]
            d_cell = dc * gates_i[t]
            c_prev = cells[t - 1] if t > 0 else 0.0
            d_forget = dc * c_prev
            dc_next = dc * gates_f[t]
            dz = dz_all[t]
            dz[:, :hidden] = d_in * gates_i[t] * (1.0 - gates_i[t])
            dz[:, hidden : 2 * hidden] = d_forget * gates_f[t] * (1.0 - gates_f[t])
            dz[:, 2 * hidden : 3 * hidden] = d_cell * (1.0 - gates_g[t] * gates_g[t])
            dz[:, 3 * hidden :] = d_out * gates_o[t] * (1.0 - gates_o[t])
            dh_next = dz @ w_h_t

        h_prev = np.empty_like(hiddens)
        h_prev[0] = 0.0
        h_prev[1:] = hiddens[:-1]
        dz_flat = dz_all.reshape(-1, 4 * hidden)
        w_h.grad += h_prev.reshape(-1, hidden).T @ dz_flat
        bias.grad += dz_flat.sum(axis=0)

        x_proc = np.ascontiguousarray(x.transpose(1, 0, 2))
        if direction == "bwd":
            x_proc = x_proc[::-1]
        w_x.grad += x_proc.reshape(-1, self.input_dim).T @ dz_flat
        dx_proc = (dz_flat @ w_x.value.T).reshape(steps, batch, self.input_dim)
        if direction == "bwd":
            dx_proc = dx_proc[::-1]
        return dx_proc.transpose(1, 0, 2)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise NoForwardRecorded("bilstm: no forward pass cached")
        x3, stash_f, stash_b, single = self._cache
        self._cache = None
        dout = np.asarray(dout, dtype=np.float64)
        d3 = dout[None] if single else dout
        hidden = self.hidden_dim
        if d3.shape != (x3.shape[0], x3.shape[1], 2 * hidden):
            raise DimMismatch(f"bilstm: grad shape {dout.shape} does not match output")
        dhs_f = np.ascontiguousarray(d3[:, :, :hidden].transpose(1, 0, 2))
        dhs_b = np.ascontiguousarray(d3[:, :, hidden:].transpose(1, 0, 2)[::-1])
        dx = self._backprop_direction(x3, dhs_f, "fwd", stash_f)
        dx += self._backprop_direction(x3, dhs_b, "bwd", stash_b)
        return dx[0] if single else dx


def cross_entropy(
    logits: np.ndarray,
    labels: np.ndarray,
    class_weights: np.ndarray | None = None,
) -> tuple[float, np.ndarray]:
    """Mean weighted cross-entropy from raw logits, plus d(loss)/d(logits).

    Log-probabilities come from a max-shifted log-sum-exp, so large logits
    do not overflow. Per-example weights are class_weights[label] when given.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2:
        raise DimMismatch(f"logits must be (N, C), got shape {logits.shape}")
    labels = np.asarray(labels)
    if labels.shape != (logits.shape[0],):
        raise DimMismatch(f"labels shape {labels.shape} for {logits.shape[0]} rows")
    n, n_classes = logits.shape
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise LabelOutOfRange(f"labels outside [0, {n_classes})")

    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_p = shifted - log_z
    probs = np.exp(log_p)

    if class_weights is not None:
        class_weights = np.asarray(class_weights, dtype=np.float64)
        if class_weights.shape != (n_classes,):
            raise DimMismatch(f"class_weights shape {class_weights.shape}")
        w = class_weights[labels]
    else:
        w = np.ones(n)

    rows = np.arange(n)
    loss = float(-(w * log_p[rows, labels]).sum() / n)
    dlogits = probs * w[:, None]
    dlogits[rows, labels] -= w
    dlogits /= n
    return loss, dlogits
