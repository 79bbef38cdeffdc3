"""Dense networks with hand-written backpropagation, optimizers and checkpoints."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"TAOIPS01"


class TrainingError(RuntimeError):
    """Non-finite gradients or a diverging loss."""


@dataclass
class ParamSet:
    """Flat parameter vector of a dense network plus its layer shapes.

    Layer ``i`` occupies ``in*out`` weights (row-major, ``(in, out)``)
    followed by ``out`` biases.
    """

    shapes: list
    values: np.ndarray

    @classmethod
    def zeros(cls, shapes):
        shapes = [(int(a), int(b)) for a, b in shapes]
        return cls(shapes, np.zeros(param_count(shapes)))

    @property
    def count(self) -> int:
        return int(self.values.size)

    def copy(self) -> "ParamSet":
        return ParamSet(list(self.shapes), self.values.copy())

    def layers(self):
        """Yield ``(W, b)`` views into ``values``."""
        off = 0
        for a, b in self.shapes:
            W = self.values[off : off + a * b].reshape(a, b)
            off += a * b
            bias = self.values[off : off + b]
            off += b
            yield W, bias


def param_count(shapes) -> int:
    return int(sum(a * b + b for a, b in shapes))


def layer_shapes(n_in, hidden, n_out):
    sizes = [n_in, *hidden, n_out]
    return [(sizes[i], sizes[i + 1]) for i in range(len(sizes) - 1)]


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class MlpNet:
    """ReLU hidden layers with a linear or logistic output."""

    def __init__(self, n_in, hidden, n_out, out_act="linear", rng=None, final_scale=3e-3):
        if out_act not in ("linear", "sigmoid"):
            raise ValueError(f"unknown output activation {out_act!r}")
        self.out_act = out_act
        self.params = ParamSet.zeros(layer_shapes(n_in, hidden, n_out))
        if rng is not None:
            self.init(rng, final_scale)

    @property
    def n_in(self):
        return self.params.shapes[0][0]

    @property
    def n_out(self):
        return self.params.shapes[-1][1]

    def init(self, rng, final_scale=3e-3):
        layers = list(self.params.layers())
        for i, (W, b) in enumerate(layers):
            bound = final_scale if i == len(layers) - 1 else 1.0 / np.sqrt(W.shape[0])
            W[...] = rng.uniform(-bound, bound, size=W.shape)
            b[...] = rng.uniform(-bound, bound, size=b.shape)

    def copy(self) -> "MlpNet":
        out = MlpNet.__new__(MlpNet)
        out.out_act = self.out_act
        out.params = self.params.copy()
        return out

    def forward(self, x):
        y, _ = self.forward_cache(x)
        return y

    def forward_cache(self, x):
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        h = x[None, :] if single else x
        if h.shape[1] != self.n_in:
            raise ValueError(f"input width {h.shape[1]} != {self.n_in}")
        acts = [h]
        layers = list(self.params.layers())
        for i, (W, b) in enumerate(layers):
            pre = h @ W + b
            if i < len(layers) - 1:
                h = np.maximum(pre, 0.0)
            elif self.out_act == "sigmoid":
                h = _sigmoid(pre)
            else:
                h = pre
            acts.append(h)
        y = h[0] if single else h
        return y, (single, acts)

    def backward(self, cache, dy):
        """Gradient of a scalar loss w.r.t. the flat parameters and the input.

        ``dy`` is the loss gradient w.r.t. the network output.
        """
        single, acts = cache
        g = np.asarray(dy, dtype=np.float64)
        if single:
            g = g[None, :]
        grad = np.empty_like(self.params.values)
        layers = list(self.params.layers())
        offsets = np.cumsum([0] + [a * b + b for a, b in self.params.shapes])
        for i in range(len(layers) - 1, -1, -1):
            W, _ = layers[i]
            out = acts[i + 1]
            if i == len(layers) - 1:
                if self.out_act == "sigmoid":
                    g = g * out * (1.0 - out)
            else:
                g = g * (out > 0.0)
            a, b = W.shape
            off = offsets[i]
            grad[off : off + a * b] = (acts[i].T @ g).ravel()
            grad[off + a * b : off + a * b + b] = g.sum(axis=0)
            g = g @ W.T
        dx = g[0] if single else g
        return grad, dx


class Adam:
    def __init__(self, size, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, values, grad):
        self.t += 1
        self.m *= self.beta1
        self.m += (1 - self.beta1) * grad
        self.v *= self.beta2
        self.v += (1 - self.beta2) * grad * grad
        mhat = self.m / (1 - self.beta1**self.t)
        vhat = self.v / (1 - self.beta2**self.t)
        values -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


class Sgd:
    def __init__(self, size, lr):
        self.lr = lr

    def step(self, values, grad):
        values -= self.lr * grad


def make_optimizer(kind, size, lr):
    if kind == "adam":
        return Adam(size, lr)
    if kind == "sgd":
        return Sgd(size, lr)
    raise ValueError(f"unknown optimizer {kind!r}")


def grad_step(net: MlpNet, grad, optimizer, where="network"):
    """Apply one optimizer step after checking the gradient is finite."""
    if not np.all(np.isfinite(grad)):
        bad = int(np.sum(~np.isfinite(grad)))
        raise TrainingError(f"{where}: {bad} non-finite gradient entries (|max| of finite = "
                            f"{np.nanmax(np.abs(np.where(np.isfinite(grad), grad, 0.0))):.3g})")
    optimizer.step(net.params.values, grad)


def soft_update(target: MlpNet, source: MlpNet, tau: float):
    t = target.params.values
    t *= 1.0 - tau
    t += tau * source.params.values


# --- checkpoints -----------------------------------------------------------
#
# layout: MAGIC (8 bytes) | uint32 n_layers | n_layers x (uint32 in, uint32 out)
#         | float64 values, little-endian, in ParamSet order


def dump_params(ps: ParamSet) -> bytes:
    head = MAGIC + struct.pack("<I", len(ps.shapes))
    head += b"".join(struct.pack("<II", a, b) for a, b in ps.shapes)
    return head + ps.values.astype("<f8").tobytes()


def load_params(blob: bytes) -> ParamSet:
    if blob[:8] != MAGIC:
        raise ValueError("not a parameter checkpoint")
    (n,) = struct.unpack_from("<I", blob, 8)
    shapes = [struct.unpack_from("<II", blob, 12 + 8 * i) for i in range(n)]
    off = 12 + 8 * n
    values = np.frombuffer(blob, dtype="<f8", offset=off).astype(np.float64)
    if values.size != param_count(shapes):
        raise ValueError("checkpoint size does not match its shape table")
    return ParamSet([tuple(s) for s in shapes], values)


def save_params(path, ps: ParamSet):
    Path(path).write_bytes(dump_params(ps))


def read_params(path) -> ParamSet:
    return load_params(Path(path).read_bytes())
