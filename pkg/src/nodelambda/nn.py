"""Dense ReLU networks with exact backprop, three losses and Adam, in float64."""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

MAGIC = b"NLRL"
FORMAT_VERSION = 1


class ShapeError(ValueError):
    pass


class LossKind(Enum):
    MSE = "mse"
    GROUPED_CE = "grouped_ce"
    HUBER = "huber"


@dataclass(frozen=True)
class Loss:
    kind: LossKind
    groups: int = 24
    classes: int = 6
    delta: float = 1.0

    @classmethod
    def mse(cls) -> "Loss":
        return cls(LossKind.MSE)

    @classmethod
    def grouped_ce(cls, groups: int = 24, classes: int = 6) -> "Loss":
        return cls(LossKind.GROUPED_CE, groups=groups, classes=classes)

    @classmethod
    def huber(cls, delta: float = 1.0) -> "Loss":
        return cls(LossKind.HUBER, delta=delta)


@dataclass
class MLP:
    """``weights[i]`` has shape ``(out, in)``; ReLU between layers.

    ``output`` is ``"identity"`` or ``"softplus"`` (keeps a distance head positive).
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    output: str = "identity"

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ShapeError("need one bias per weight matrix")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ShapeError(f"layer {i}: weight {w.shape} / bias {b.shape}")
            if i and w.shape[1] != self.weights[i - 1].shape[0]:
                raise ShapeError(f"layer {i} input {w.shape[1]} != previous output {self.weights[i - 1].shape[0]}")
        if self.output not in ("identity", "softplus"):
            raise ValueError(f"unknown output activation {self.output!r}")

    @property
    def dims(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    def params(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def num_params(self) -> int:
        return sum(p.size for p in self.params())

    def copy(self) -> "MLP":
        return MLP([w.copy() for w in self.weights], [b.copy() for b in self.biases], self.output)

    def copy_from(self, other: "MLP") -> None:
        """In-place parameter copy (keeps any views held elsewhere valid)."""
        for dst, src in zip(self.params(), other.params()):
            dst[...] = src

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return forward(self, x)[0]


@dataclass
class Cache:
    inputs: list[np.ndarray]  # input to each layer (2-D)
    pre: list[np.ndarray]  # pre-activations of each layer
    squeeze: bool


def _softplus(z):
    return np.logaddexp(0.0, z)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def forward(net: MLP, x: np.ndarray) -> tuple[np.ndarray, Cache]:
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    h = x[None] if squeeze else x
    if h.ndim != 2 or h.shape[1] != net.weights[0].shape[1]:
        raise ShapeError(f"input shape {x.shape} does not match input dim {net.weights[0].shape[1]}")
    inputs, pre = [], []
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        inputs.append(h)
        z = h @ w.T + b
        pre.append(z)
        if i < last:
            h = np.maximum(z, 0.0)
        elif net.output == "softplus":
            h = _softplus(z)
        else:
            h = z
    return (h[0] if squeeze else h), Cache(inputs, pre, squeeze)


def loss_and_grad(loss: Loss, y: np.ndarray, target: np.ndarray, mask=None) -> tuple[float, np.ndarray]:
    """Loss value and dL/dy for 2-D predictions ``y``.

    MSE and Huber average over the (masked) elements; grouped cross-entropy
    treats ``y`` as logits and averages over batch rows and groups.
    """
    target = np.asarray(target, dtype=np.float64).reshape(y.shape)
    if loss.kind is LossKind.GROUPED_CE:
        if y.shape[1] != loss.groups * loss.classes:
            raise ShapeError(f"grouped cross-entropy needs {loss.groups * loss.classes} outputs, got {y.shape[1]}")
        z = y.reshape(len(y), loss.groups, loss.classes)
        t = target.reshape(z.shape)
        z = z - z.max(axis=2, keepdims=True)
        logp = z - np.log(np.exp(z).sum(axis=2, keepdims=True))
        n = len(y) * loss.groups
        value = float(-(t * logp).sum() / n)
        grad = (np.exp(logp) * t.sum(axis=2, keepdims=True) - t) / n
        return value, grad.reshape(y.shape)
    m = np.ones_like(y) if mask is None else np.broadcast_to(np.asarray(mask, dtype=np.float64), y.shape)
    count = max(float(m.sum()), 1.0)
    r = y - target
    if loss.kind is LossKind.MSE:
        return float((m * r * r).sum() / count), 2.0 * m * r / count
    d = loss.delta
    a = np.abs(r)
    quad = a <= d
    elem = np.where(quad, 0.5 * r * r, d * (a - 0.5 * d))
    grad = np.where(quad, r, d * np.sign(r))
    return float((m * elem).sum() / count), m * grad / count


def backward(net: MLP, cache: Cache, loss: Loss, target, mask=None):
    """Returns ``(loss_value, grads)`` with grads as ``[(dW, db), ...]`` per layer."""
    last = len(net.weights) - 1
    z = cache.pre[last]
    if net.output == "softplus":
        y = _softplus(z)
    else:
        y = z
    target = np.asarray(target, dtype=np.float64)
    if target.size != y.size:
        raise ShapeError(f"target size {target.size} != prediction size {y.size}")
    if mask is not None and cache.squeeze:
        mask = np.asarray(mask)[None] if np.ndim(mask) == 1 else mask
    value, dy = loss_and_grad(loss, y, target, mask)
    delta = dy * _sigmoid(z) if net.output == "softplus" else dy
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(net.weights)  # type: ignore[list-item]
    for i in range(last, -1, -1):
        grads[i] = (delta.T @ cache.inputs[i], delta.sum(axis=0))
        if i:
            delta = (delta @ net.weights[i]) * (cache.pre[i - 1] > 0)
    return value, grads


def he_init(dims: Sequence[int], rng: np.random.Generator, output: str = "identity") -> MLP:
    if len(dims) < 2 or any(int(d) < 1 for d in dims):
        raise ShapeError(f"invalid layer dims {list(dims)}")
    weights = [rng.normal(0.0, np.sqrt(2.0 / n_in), size=(n_out, n_in)) for n_in, n_out in zip(dims[:-1], dims[1:])]
    biases = [np.zeros(n_out) for n_out in dims[1:]]
    return MLP(weights, biases, output)


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_net(cls, net: MLP, **kw) -> "AdamState":
        params = net.params()
        return cls(m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params], **kw)


def adam_step(net: MLP, grads, state: AdamState) -> tuple[MLP, AdamState]:
    """Bias-corrected Adam update, applied to ``net`` in place."""
    flat = [g for pair in grads for g in pair]
    params = net.params()
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    if len(flat) != len(params) or any(g.shape != p.shape for g, p in zip(flat, params)):
        raise ShapeError("gradient shapes do not match the network")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    step = state.lr / (1.0 - b1**state.t)
    inv_bc2 = 1.0 / np.sqrt(1.0 - b2**state.t)
    for p, g, m, v in zip(params, flat, state.m, state.v):
        tmp = np.multiply(g, 1.0 - b1)
        m *= b1
        m += tmp
        np.multiply(g, g, out=tmp)
        tmp *= 1.0 - b2
        v *= b2
        v += tmp
        # p -= step * m / (sqrt(v / bc2) + eps), without temporaries
        np.sqrt(v, out=tmp)
        tmp *= inv_bc2
        tmp += state.eps
        np.divide(m, tmp, out=tmp)
        tmp *= step
        p -= tmp
    return net, state


def train_step(net: MLP, opt: AdamState, x, target, loss: Loss, mask=None) -> float:
    y, cache = forward(net, x)
    value, grads = backward(net, cache, loss, target, mask)
    adam_step(net, grads, opt)
    return value


def param_digest(nets: Sequence[MLP]) -> str:
    import hashlib

    h = hashlib.sha256()
    for net in nets:
        for p in net.params():
            h.update(np.ascontiguousarray(p).tobytes())
    return h.hexdigest()


# --- gradient checking ----------------------------------------------------

def numeric_grads(net: MLP, x, loss: Loss, target, mask=None, step: float = 1e-5):
    grads = []
    for p in net.params():
        g = np.zeros_like(p)
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + step
            up = backward(net, forward(net, x)[1], loss, target, mask)[0]
            flat[k] = orig - step
            down = backward(net, forward(net, x)[1], loss, target, mask)[0]
            flat[k] = orig
            gflat[k] = (up - down) / (2 * step)
        grads.append(g)
    return grads


def relative_error(analytic: Sequence[np.ndarray], numeric: Sequence[np.ndarray]) -> float:
    a = np.concatenate([g.ravel() for g in analytic])
    n = np.concatenate([g.ravel() for g in numeric])
    denom = np.linalg.norm(a) + np.linalg.norm(n)
    return float(np.linalg.norm(a - n) / denom) if denom > 0 else 0.0


def random_problem(rng: np.random.Generator):
    """Random architecture (1-3 layers, width <= 32), loss, batch and target."""
    n_layers = int(rng.integers(1, 4))
    kind = [LossKind.MSE, LossKind.HUBER, LossKind.GROUPED_CE][int(rng.integers(3))]
    if kind is LossKind.GROUPED_CE:
        groups, classes = int(rng.integers(1, 5)), int(rng.integers(2, 7))
        out = groups * classes
        loss = Loss.grouped_ce(groups, classes)
    else:
        out = int(rng.integers(1, 9))
        loss = Loss.mse() if kind is LossKind.MSE else Loss.huber(float(rng.uniform(0.2, 2.0)))
    dims = [int(rng.integers(1, 33))] + [int(rng.integers(1, 33)) for _ in range(n_layers - 1)] + [out]
    output = "softplus" if kind is not LossKind.GROUPED_CE and rng.random() < 0.3 else "identity"
    net = he_init(dims, rng, output)
    for b in net.biases:
        b[...] = rng.normal(0.0, 0.1, size=b.shape)
    batch = int(rng.integers(1, 5))
    x = rng.normal(size=(batch, dims[0]))
    if kind is LossKind.GROUPED_CE:
        labels = rng.integers(classes, size=(batch, groups))
        target = np.eye(classes)[labels].reshape(batch, out)
    else:
        target = rng.normal(size=(batch, out)) * 2.0
    return net, x, loss, target


def gradcheck(n_cases: int = 50, seed: int = 0, step: float = 1e-5) -> list[float]:
    """Relative errors between analytic and central-difference gradients."""
    rng = np.random.default_rng(seed)
    errors = []
    for _ in range(n_cases):
        net, x, loss, target = random_problem(rng)
        _, cache = forward(net, x)
        _, grads = backward(net, cache, loss, target)
        analytic = [g for pair in grads for g in pair]
        errors.append(relative_error(analytic, numeric_grads(net, x, loss, target, step=step)))
    return errors


# --- model file -----------------------------------------------------------

def save_networks(path: str | Path, nets: Sequence[MLP]) -> None:
    """NLRL v1: magic, u32 version, u32 net count, per net u32 layer count,
    per layer u32 in/out dims then float32 weights (row-major) and biases."""
    parts = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(nets))]
    for net in nets:
        parts.append(struct.pack("<I", len(net.weights)))
        for w, b in zip(net.weights, net.biases):
            parts.append(struct.pack("<II", w.shape[1], w.shape[0]))
            parts.append(np.ascontiguousarray(w, dtype="<f4").tobytes())
            parts.append(np.ascontiguousarray(b, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_networks(path: str | Path) -> list[MLP]:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path}: not an NLRL model file")
    if len(raw) < 12:
        raise ValueError(f"{path}: truncated model header")
    version, count = struct.unpack_from("<II", raw, 4)
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported model format version {version}")
    off = 12
    nets = []
    try:
        for _ in range(count):
            (n_layers,) = struct.unpack_from("<I", raw, off)
            off += 4
            ws, bs = [], []
            for _ in range(n_layers):
                n_in, n_out = struct.unpack_from("<II", raw, off)
                off += 8
                w = np.frombuffer(raw, dtype="<f4", count=n_in * n_out, offset=off)
                off += 4 * n_in * n_out
                b = np.frombuffer(raw, dtype="<f4", count=n_out, offset=off)
                off += 4 * n_out
                ws.append(w.reshape(n_out, n_in).astype(np.float64))
                bs.append(b.astype(np.float64))
            nets.append(MLP(ws, bs))
    except (struct.error, ValueError) as exc:
        raise ValueError(f"{path}: truncated or corrupt model file") from exc
    if off != len(raw):
        raise ValueError(f"{path}: trailing bytes in model file")
    return nets


def round_to_f32(net: MLP) -> None:
    """Round parameters to what a save/load cycle would produce."""
    for p in net.params():
        p[...] = p.astype(np.float32)
