"""Minimal dense/convolutional network engine on float64 numpy arrays.

Supports forward inference, cross-entropy loss, and exact reverse-mode
gradients with respect to both parameters (for training) and the input
tensor (for saliency).  Layers are parameter holders with pure-functional
forward/backward methods, so a network in infer mode can be shared across
threads: no activation state is stored on the layers themselves.

Conventions:
- every float array is float64, row-major;
- sequence inputs are (T, C); a leading batch axis (N, T, C) is accepted
  everywhere and single inputs are lifted to N=1 internally;
- conv1d is valid (no padding) cross-correlation with stride 1;
- dropout uses inverted scaling in train mode and is the identity in
  infer mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class EngineError(ValueError):
    """Raised for invalid networks, shapes, or labels."""


class TrainingDiverged(RuntimeError):
    """Raised when the training loss stops being finite."""

    def __init__(self, epoch: int, loss: float):
        super().__init__(f"non-finite loss {loss!r} at epoch {epoch}")
        self.epoch = epoch


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape).astype(np.float64)


class Layer:
    """Base layer: owns parameters, computes shapes, and differentiates.

    forward(x, train, rng) -> (y, cache); backward(cache, dy) -> (dx, grads)
    where grads maps parameter names to arrays shaped like the parameters.
    """

    kind = "layer"

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}

    def out_shape(self, in_shape: tuple) -> tuple:
        raise NotImplementedError

    def forward(self, x, train=False, rng=None):
        raise NotImplementedError

    def backward(self, cache, dy):
        raise NotImplementedError

    def spec(self) -> dict:
        """Hyperparameters needed to rebuild this layer (no weights)."""
        return {"kind": self.kind}

    def _fail(self, msg: str):
        raise EngineError(f"{self.kind}: {msg}")


class Embedding(Layer):
    kind = "embedding"

    def __init__(self, vocab_size: int, dim: int, rng: np.random.Generator,
                 table: np.ndarray | None = None):
        super().__init__()
        self.vocab_size = vocab_size
        self.dim = dim
        if table is not None:
            if table.shape != (vocab_size, dim):
                self._fail(f"table shape {table.shape} != ({vocab_size}, {dim})")
            w = np.asarray(table, dtype=np.float64).copy()
        else:
            w = glorot_uniform(rng, (vocab_size, dim), vocab_size, dim)
        self.params = {"w": w}

    def out_shape(self, in_shape):
        if len(in_shape) != 1:
            self._fail(f"expects index sequence (T,), got {in_shape}")
        return (in_shape[0], self.dim)

    def forward(self, x, train=False, rng=None):
        idx = np.asarray(x)
        if idx.min() < 0 or idx.max() >= self.vocab_size:
            self._fail(f"index out of range [0, {self.vocab_size})")
        return self.params["w"][idx], idx

    def backward(self, cache, dy):
        idx = cache
        dw = np.zeros_like(self.params["w"])
        np.add.at(dw, idx.ravel(), dy.reshape(-1, self.dim))
        # indices are not differentiable; upstream gradient stops here
        return None, {"w": dw}

    def spec(self):
        return {"kind": self.kind, "vocab_size": self.vocab_size, "dim": self.dim}


class Conv1D(Layer):
    kind = "conv1d"

    def __init__(self, width: int, in_channels: int, out_channels: int,
                 rng: np.random.Generator):
        super().__init__()
        self.width = width
        self.in_channels = in_channels
        self.out_channels = out_channels
        fan_in = width * in_channels
        fan_out = width * out_channels
        self.params = {
            "w": glorot_uniform(rng, (width, in_channels, out_channels), fan_in, fan_out),
            "b": np.zeros(out_channels, dtype=np.float64),
        }

    def out_shape(self, in_shape):
        if len(in_shape) != 2 or in_shape[1] != self.in_channels:
            self._fail(f"expects (T, {self.in_channels}), got {in_shape}")
        if in_shape[0] < self.width:
            self._fail(f"sequence length {in_shape[0]} < kernel width {self.width}")
        return (in_shape[0] - self.width + 1, self.out_channels)

    def forward(self, x, train=False, rng=None):
        # windows: (N, T-k+1, C, k)
        windows = np.lib.stride_tricks.sliding_window_view(x, self.width, axis=1)
        y = np.einsum("ntck,kco->nto", windows, self.params["w"], optimize=True)
        y += self.params["b"]
        return y, (windows, x.shape)

    def backward(self, cache, dy):
        windows, x_shape = cache
        dw = np.einsum("ntck,nto->kco", windows, dy, optimize=True)
        db = dy.sum(axis=(0, 1))
        dx = np.zeros(x_shape, dtype=np.float64)
        t_out = dy.shape[1]
        for j in range(self.width):
            dx[:, j:j + t_out, :] += dy @ self.params["w"][j].T
        return dx, {"w": dw, "b": db}

    def spec(self):
        return {"kind": self.kind, "width": self.width,
                "in_channels": self.in_channels, "out_channels": self.out_channels}


class Relu(Layer):
    kind = "relu"

    def out_shape(self, in_shape):
        return in_shape

    def forward(self, x, train=False, rng=None):
        mask = x > 0
        return np.where(mask, x, 0.0), mask

    def backward(self, cache, dy):
        return dy * cache, {}


class MaxPool1D(Layer):
    """Local max pooling over the time axis; stride defaults to the width."""

    kind = "maxpool"

    def __init__(self, width: int, stride: int | None = None):
        super().__init__()
        self.width = width
        self.stride = width if stride is None else stride

    def out_shape(self, in_shape):
        if len(in_shape) != 2:
            self._fail(f"expects (T, C), got {in_shape}")
        if in_shape[0] < self.width:
            self._fail(f"sequence length {in_shape[0]} < pool width {self.width}")
        return ((in_shape[0] - self.width) // self.stride + 1, in_shape[1])

    def forward(self, x, train=False, rng=None):
        windows = np.lib.stride_tricks.sliding_window_view(x, self.width, axis=1)
        windows = windows[:, ::self.stride]  # (N, P, C, width)
        arg = windows.argmax(axis=-1)
        y = np.take_along_axis(windows, arg[..., None], axis=-1)[..., 0]
        return y, (arg, x.shape)

    def backward(self, cache, dy):
        arg, x_shape = cache
        n, p, c = dy.shape
        dx = np.zeros(x_shape, dtype=np.float64)
        ni, pi, ci = np.ogrid[:n, :p, :c]
        np.add.at(dx, (ni, pi * self.stride + arg, ci), dy)
        return dx, {}

    def spec(self):
        return {"kind": self.kind, "width": self.width, "stride": self.stride}


class GlobalMaxPool(Layer):
    """Max over the whole time axis: (T, C) -> (C,)."""

    kind = "maxpool-over-time"

    def out_shape(self, in_shape):
        if len(in_shape) != 2:
            self._fail(f"expects (T, C), got {in_shape}")
        return (in_shape[1],)

    def forward(self, x, train=False, rng=None):
        arg = x.argmax(axis=1)  # (N, C)
        y = np.take_along_axis(x, arg[:, None, :], axis=1)[:, 0, :]
        return y, (arg, x.shape)

    def backward(self, cache, dy):
        arg, x_shape = cache
        n, c = dy.shape
        dx = np.zeros(x_shape, dtype=np.float64)
        ni, ci = np.ogrid[:n, :c]
        np.add.at(dx, (ni, arg, ci), dy)
        return dx, {}


class Dense(Layer):
    """Fully connected layer; flattens any trailing input axes."""

    kind = "dense"

    def __init__(self, in_features: int, units: int, rng: np.random.Generator):
        super().__init__()
        self.in_features = in_features
        self.units = units
        self.params = {
            "w": glorot_uniform(rng, (in_features, units), in_features, units),
            "b": np.zeros(units, dtype=np.float64),
        }

    def out_shape(self, in_shape):
        flat = int(np.prod(in_shape))
        if flat != self.in_features:
            self._fail(f"expects {self.in_features} features, got {in_shape} = {flat}")
        return (self.units,)

    def forward(self, x, train=False, rng=None):
        xf = x.reshape(x.shape[0], -1)
        return xf @ self.params["w"] + self.params["b"], (xf, x.shape)

    def backward(self, cache, dy):
        xf, x_shape = cache
        dw = xf.T @ dy
        db = dy.sum(axis=0)
        dx = (dy @ self.params["w"].T).reshape(x_shape)
        return dx, {"w": dw, "b": db}

    def spec(self):
        return {"kind": self.kind, "in_features": self.in_features, "units": self.units}


class Dropout(Layer):
    kind = "dropout"

    def __init__(self, p: float):
        super().__init__()
        if not 0.0 <= p < 1.0:
            self._fail(f"drop probability {p} outside [0, 1)")
        self.p = p

    def out_shape(self, in_shape):
        return in_shape

    def forward(self, x, train=False, rng=None):
        if not train or self.p == 0.0:
            return x, None
        if rng is None:
            self._fail("train-mode forward requires an rng")
        keep = (rng.random(x.shape) >= self.p) / (1.0 - self.p)
        return x * keep, keep

    def backward(self, cache, dy):
        if cache is None:
            return dy, {}
        return dy * cache, {}

    def spec(self):
        return {"kind": self.kind, "p": self.p}


class Softmax(Layer):
    kind = "softmax"

    def out_shape(self, in_shape):
        if len(in_shape) != 1:
            self._fail(f"expects logits (K,), got {in_shape}")
        return in_shape

    def forward(self, x, train=False, rng=None):
        z = x - x.max(axis=-1, keepdims=True)
        e = np.exp(z)
        y = e / e.sum(axis=-1, keepdims=True)
        return y, y

    def backward(self, cache, dy):
        y = cache
        dx = y * (dy - (dy * y).sum(axis=-1, keepdims=True))
        return dx, {}


class Parallel(Layer):
    """Runs each branch (a list of layers) on the same input and
    concatenates the branch outputs along the last axis."""

    kind = "parallel"

    def __init__(self, branches: list[list[Layer]]):
        super().__init__()
        self.branches = branches

    def out_shape(self, in_shape):
        dims = []
        for branch in self.branches:
            shape = in_shape
            for layer in branch:
                shape = layer.out_shape(shape)
            if len(shape) != 1:
                self._fail(f"branch output must be 1-d, got {shape}")
            dims.append(shape[0])
        return (sum(dims),)

    def forward(self, x, train=False, rng=None):
        outs, caches = [], []
        for branch in self.branches:
            h = x
            branch_cache = []
            for layer in branch:
                h, c = layer.forward(h, train=train, rng=rng)
                branch_cache.append(c)
            outs.append(h)
            caches.append(branch_cache)
        sizes = [o.shape[-1] for o in outs]
        return np.concatenate(outs, axis=-1), (caches, sizes)

    def backward(self, cache, dy):
        caches, sizes = cache
        grads: dict[str, np.ndarray] = {}
        dx_total = None
        offset = 0
        for bi, (branch, branch_cache) in enumerate(zip(self.branches, caches)):
            g = dy[..., offset:offset + sizes[bi]]
            offset += sizes[bi]
            for li in range(len(branch) - 1, -1, -1):
                g, layer_grads = branch[li].backward(branch_cache[li], g)
                for name, val in layer_grads.items():
                    grads[f"{bi}.{li}.{name}"] = val
            if g is not None:
                dx_total = g if dx_total is None else dx_total + g
        return dx_total, grads

    def spec(self):
        return {"kind": self.kind,
                "branches": [[l.spec() for l in branch] for branch in self.branches]}


@dataclass
class CostGradient:
    """Loss value with exact reverse-mode gradients.

    ``wrt_input`` is shaped like the encoded input, except for networks
    whose first layer is an embedding, where it holds the gradient with
    respect to the embedded rows (T, D): index sequences themselves are
    not differentiable, and the per-position row gradients are what
    saliency needs.
    """

    loss: float
    wrt_input: np.ndarray
    wrt_params: dict[str, np.ndarray]


@dataclass
class Network:
    """Ordered layer stack ending in softmax.

    In infer mode the network is deterministic and safe to share across
    threads; training mutates parameters and needs exclusive ownership.
    """

    layers: list[Layer]
    input_shape: tuple
    mode: str = "infer"
    _shapes: list[tuple] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if not self.layers:
            raise EngineError("network needs at least one layer")
        shapes = [tuple(self.input_shape)]
        for i, layer in enumerate(self.layers):
            try:
                shapes.append(layer.out_shape(shapes[-1]))
            except EngineError as e:
                raise EngineError(f"layer {i} ({layer.kind}): {e}") from None
        self._shapes = shapes

    @property
    def n_classes(self) -> int:
        return self._shapes[-1][0]

    def shape_trace(self) -> list[tuple]:
        return list(self._shapes)

    def param_items(self) -> list[tuple[str, np.ndarray]]:
        """Flat (path, array) pairs in deterministic order."""
        items = []
        for i, layer in enumerate(self.layers):
            if isinstance(layer, Parallel):
                for bi, branch in enumerate(layer.branches):
                    for li, sub in enumerate(branch):
                        for name, arr in sub.params.items():
                            items.append((f"{i}.{bi}.{li}.{name}", arr))
            else:
                for name, arr in layer.params.items():
                    items.append((f"{i}.{name}", arr))
        return items

    def set_param(self, path: str, value: np.ndarray) -> None:
        parts = path.split(".")
        layer = self.layers[int(parts[0])]
        if isinstance(layer, Parallel):
            target = layer.branches[int(parts[1])][int(parts[2])]
            name = parts[3]
        else:
            target, name = layer, parts[1]
        if target.params[name].shape != value.shape:
            raise EngineError(f"parameter {path}: shape {value.shape} != "
                              f"{target.params[name].shape}")
        target.params[name] = np.asarray(value, dtype=np.float64)

    def _lift(self, x) -> tuple[np.ndarray, bool]:
        arr = np.asarray(x)
        want = tuple(self.input_shape)
        if arr.shape == want:
            return arr[None], True
        if arr.shape[1:] == want:
            return arr, False
        raise EngineError(f"layer 0 ({self.layers[0].kind}): input shape "
                          f"{arr.shape} does not match {want} (or batch thereof)")

    def _run(self, x: np.ndarray, train: bool, rng) -> tuple[np.ndarray, list]:
        caches = []
        h = x
        for layer in self.layers:
            h, c = layer.forward(h, train=train, rng=rng)
            caches.append(c)
        return h, caches


def forward(net: Network, x) -> np.ndarray:
    """Class-probability vector(s) for one input or a batch."""
    if net.layers[-1].kind != "softmax":
        raise EngineError("network must end in a softmax layer")
    xb, single = net._lift(x)
    y, _ = net._run(xb, train=False, rng=None)
    return y[0] if single else y


def _loss_backward(net: Network, xb: np.ndarray, labels: np.ndarray,
                   train: bool = False, rng=None):
    """Fused softmax cross-entropy: returns (mean loss, caches, dlogits)."""
    if net.layers[-1].kind != "softmax":
        raise EngineError("network must end in a softmax layer")
    k = net.n_classes
    if np.any(labels < 0) or np.any(labels >= k):
        raise EngineError(f"label out of range [0, {k})")
    h = xb
    caches = []
    for layer in net.layers[:-1]:
        h, c = layer.forward(h, train=train, rng=rng)
        caches.append(c)
    logits = h  # (N, K)
    lse = np.logaddexp.reduce(logits, axis=-1)
    losses = lse - logits[np.arange(len(labels)), labels]
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    probs = e / e.sum(axis=-1, keepdims=True)
    dlogits = probs.copy()
    dlogits[np.arange(len(labels)), labels] -= 1.0
    return losses, caches, dlogits


def loss_and_gradients(net: Network, x, label: int) -> CostGradient:
    """Cross-entropy loss of one input plus gradients w.r.t. the input
    and every parameter."""
    xb, single = net._lift(x)
    if not single:
        raise EngineError("loss_and_gradients takes a single input")
    losses, caches, dlogits = _loss_backward(net, xb, np.array([int(label)]))
    grads: dict[str, np.ndarray] = {}
    g = dlogits
    wrt_input = None
    for i in range(len(net.layers) - 2, -1, -1):
        layer = net.layers[i]
        if i == 0 and layer.kind == "embedding":
            wrt_input = g[0].copy()  # gradient w.r.t. embedded rows
        g, layer_grads = layer.backward(caches[i], g)
        for name, val in layer_grads.items():
            grads[f"{i}.{name}"] = val
    if wrt_input is None:
        wrt_input = g[0] if g is not None else np.zeros(net.input_shape)
    return CostGradient(loss=float(losses[0]), wrt_input=wrt_input, wrt_params=grads)


@dataclass
class TrainConfig:
    epochs: int = 10
    learning_rate: float = 0.05
    batch_size: int = 32
    seed: int = 0


def train(net: Network, dataset: list[tuple[np.ndarray, int]],
          config: TrainConfig) -> tuple[Network, list[float]]:
    """Mini-batch SGD with a fixed learning rate.

    Mutates and returns ``net``; the loss curve holds per-epoch mean loss.
    Fully reproducible for a given seed.
    """
    if not dataset:
        raise EngineError("dataset is empty")
    if config.learning_rate <= 0:
        raise EngineError("learning rate must be positive")
    xs = np.stack([np.asarray(x) for x, _ in dataset])
    ys = np.array([int(y) for _, y in dataset])
    n = len(dataset)
    rng = np.random.default_rng(config.seed)
    curve: list[float] = []
    prev_mode = net.mode
    net.mode = "train"
    try:
        for epoch in range(config.epochs):
            order = rng.permutation(n)
            total = 0.0
            for start in range(0, n, config.batch_size):
                idx = order[start:start + config.batch_size]
                xb, yb = xs[idx], ys[idx]
                losses, caches, dlogits = _loss_backward(net, xb, yb,
                                                         train=True, rng=rng)
                total += float(losses.sum())
                g = dlogits / len(idx)  # mean loss over the batch
                updates: dict[int, dict[str, np.ndarray]] = {}
                for i in range(len(net.layers) - 2, -1, -1):
                    g, layer_grads = net.layers[i].backward(caches[i], g)
                    if layer_grads:
                        updates[i] = layer_grads
                for i, layer_grads in updates.items():
                    layer = net.layers[i]
                    for name, grad in layer_grads.items():
                        if isinstance(layer, Parallel):
                            bi, li, pname = name.split(".")
                            target = layer.branches[int(bi)][int(li)]
                            target.params[pname] = (
                                target.params[pname] - config.learning_rate * grad)
                        else:
                            layer.params[name] = (
                                layer.params[name] - config.learning_rate * grad)
            mean_loss = total / n
            if not np.isfinite(mean_loss):
                raise TrainingDiverged(epoch, mean_loss)
            curve.append(mean_loss)
    finally:
        net.mode = prev_mode
    return net, curve


_LAYER_KINDS = {
    "embedding": Embedding,
    "conv1d": Conv1D,
    "relu": Relu,
    "maxpool": MaxPool1D,
    "maxpool-over-time": GlobalMaxPool,
    "dense": Dense,
    "dropout": Dropout,
    "softmax": Softmax,
    "parallel": Parallel,
}


def layer_from_spec(spec: dict) -> Layer:
    """Rebuild an (uninitialized-weights) layer from its spec dict.

    Weight values come from a checkpoint afterwards; the rng here only
    fills placeholder arrays of the right shape.
    """
    kind = spec["kind"]
    rng = np.random.default_rng(0)
    if kind == "embedding":
        return Embedding(spec["vocab_size"], spec["dim"], rng)
    if kind == "conv1d":
        return Conv1D(spec["width"], spec["in_channels"], spec["out_channels"], rng)
    if kind == "relu":
        return Relu()
    if kind == "maxpool":
        return MaxPool1D(spec["width"], spec["stride"])
    if kind == "maxpool-over-time":
        return GlobalMaxPool()
    if kind == "dense":
        return Dense(spec["in_features"], spec["units"], rng)
    if kind == "dropout":
        return Dropout(spec["p"])
    if kind == "softmax":
        return Softmax()
    if kind == "parallel":
        return Parallel([[layer_from_spec(s) for s in branch]
                         for branch in spec["branches"]])
    raise EngineError(f"unknown layer kind {kind!r}")
