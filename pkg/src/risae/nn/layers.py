"""Layers for the convolutional autoencoder and the RIS phase network.

Tensors are plain numpy arrays laid out as ``(batch, sequence, features)``
for the convolutional stacks and ``(batch, features)`` for the dense stack.
Every layer caches what it needs during ``forward`` so that ``backward``
can be called once afterwards.
"""
from __future__ import annotations

import numpy as np

ACTIVATIONS = ("elu", "relu", "linear", "softmax")


class DimensionError(ValueError):
    """Raised when an array does not have the shape a layer expects."""


class StatisticsError(RuntimeError):
    """Raised when batch norm is used for inference before any training step."""


def glorot_uniform(rng, shape, fan_in, fan_out, dtype=np.float64):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def _im2col(x, kernel_size):
    # same padding, stride 1: (B, L, C) -> (B, L, K*C) with tap-major layout
    pad_left = (kernel_size - 1) // 2
    pad_right = kernel_size - 1 - pad_left
    xp = np.pad(x, ((0, 0), (pad_left, pad_right), (0, 0)))
    cols = np.lib.stride_tricks.sliding_window_view(xp, kernel_size, axis=1)
    # sliding_window_view puts the window last: (B, L, C, K) -> (B, L, K, C)
    cols = cols.transpose(0, 1, 3, 2)
    return cols.reshape(x.shape[0], x.shape[1], kernel_size * x.shape[2])


def conv1d_forward(x, weight, bias):
    """Same-padded, stride-1 1D convolution (cross-correlation).

    Parameters
    ----------
    x : ndarray, shape (B, L, C_in)
    weight : ndarray, shape (K, C_in, C_out)
    bias : ndarray, shape (C_out,)
    """
    if x.ndim != 3:
        raise DimensionError(f"conv1d expects (batch, length, channels), got ndim={x.ndim}")
    k, c_in, c_out = weight.shape
    if x.shape[2] != c_in:
        raise DimensionError(
            f"conv1d channel axis (axis 2) has {x.shape[2]} features, weight expects {c_in}"
        )
    cols = _im2col(x, k)
    return cols @ weight.reshape(k * c_in, c_out) + bias


def dense_forward(x, weight, bias):
    """Affine map ``x @ W + b`` along the last axis."""
    if x.shape[-1] != weight.shape[0]:
        raise DimensionError(
            f"dense last axis has {x.shape[-1]} features, weight expects {weight.shape[0]}"
        )
    return x @ weight + bias


def elu(x):
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))


def relu(x):
    return np.maximum(x, 0.0)


def softmax(x):
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def activation(x, kind):
    """Apply ``elu`` (alpha=1), ``relu``, ``linear`` or ``softmax`` (last axis)."""
    if kind == "elu":
        return elu(x)
    if kind == "relu":
        return relu(x)
    if kind == "linear":
        return x
    if kind == "softmax":
        return softmax(x)
    raise ValueError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}")


class Layer:
    kind = "layer"

    def __init__(self):
        self.params = {}
        self.grads = {}

    def forward(self, x, training=False):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError

    def state(self):
        """Non-trainable arrays that belong in a checkpoint."""
        return {}

    def load_state(self, state):
        pass


class Conv1D(Layer):
    kind = "conv1d"

    def __init__(self, in_features, out_features, kernel_size=3, rng=None, dtype=np.float64):
        super().__init__()
        rng = np.random.default_rng() if rng is None else rng
        self.kernel_size = kernel_size
        shape = (kernel_size, in_features, out_features)
        self.params["weight"] = glorot_uniform(
            rng, shape, kernel_size * in_features, kernel_size * out_features, dtype
        )
        self.params["bias"] = np.zeros(out_features, dtype=dtype)
        self._cols = None

    @property
    def in_features(self):
        return self.params["weight"].shape[1]

    @property
    def out_features(self):
        return self.params["weight"].shape[2]

    def forward(self, x, training=False):
        w = self.params["weight"]
        if x.ndim != 3 or x.shape[2] != self.in_features:
            raise DimensionError(
                f"conv1d channel axis (axis 2) mismatch: got shape {x.shape}, "
                f"expected (*, *, {self.in_features})"
            )
        k = self.kernel_size
        self._cols = x if k == 1 else _im2col(x, k)
        return self._cols @ w.reshape(k * self.in_features, self.out_features) + self.params["bias"]

    def backward(self, grad):
        k, c_in, c_out = self.params["weight"].shape
        cols = self._cols
        g2 = grad.reshape(-1, c_out)
        self.grads["weight"] = (cols.reshape(-1, k * c_in).T @ g2).reshape(k, c_in, c_out)
        self.grads["bias"] = g2.sum(axis=0)
        if k == 1:
            return grad @ self.params["weight"][0].T
        dcols = (grad @ self.params["weight"].reshape(k * c_in, c_out).T).reshape(
            grad.shape[0], grad.shape[1], k, c_in
        )
        # scatter taps back: output position l, tap t reads input l + t - pad_left
        pad_left = (k - 1) // 2
        length = grad.shape[1]
        dx = np.zeros((grad.shape[0], length, c_in), dtype=grad.dtype)
        for t in range(k):
            shift = t - pad_left
            lo, hi = max(0, -shift), min(length, length - shift)
            if lo < hi:
                dx[:, lo + shift:hi + shift] += dcols[:, lo:hi, t]
        return dx


class Dense(Layer):
    kind = "dense"

    def __init__(self, in_features, out_features, rng=None, dtype=np.float64):
        super().__init__()
        rng = np.random.default_rng() if rng is None else rng
        self.params["weight"] = glorot_uniform(
            rng, (in_features, out_features), in_features, out_features, dtype
        )
        self.params["bias"] = np.zeros(out_features, dtype=dtype)
        self._x = None

    def forward(self, x, training=False):
        self._x = x
        return dense_forward(x, self.params["weight"], self.params["bias"])

    def backward(self, grad):
        w = self.params["weight"]
        x2 = self._x.reshape(-1, w.shape[0])
        g2 = grad.reshape(-1, w.shape[1])
        self.grads["weight"] = x2.T @ g2
        self.grads["bias"] = g2.sum(axis=0)
        return grad @ w.T


class BatchNorm(Layer):
    """Batch normalization over every axis except the last.

    Running statistics are seeded by the first training batch and then
    tracked with ``running = momentum * running + (1 - momentum) * batch``.
    """

    kind = "batchnorm"

    def __init__(self, features, momentum=0.99, eps=1e-5, dtype=np.float64):
        super().__init__()
        self.momentum = momentum
        self.eps = eps
        self.params["gamma"] = np.ones(features, dtype=dtype)
        self.params["beta"] = np.zeros(features, dtype=dtype)
        self.running_mean = None
        self.running_var = None
        self._cache = None

    @property
    def initialized(self):
        return self.running_mean is not None

    def forward(self, x, training=False):
        features = self.params["gamma"].shape[0]
        if x.shape[-1] != features:
            raise DimensionError(
                f"batchnorm feature axis has {x.shape[-1]} features, expected {features}"
            )
        axes = tuple(range(x.ndim - 1))
        if training:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            if self.running_mean is None:
                self.running_mean = mean.copy()
                self.running_var = var.copy()
            else:
                m = self.momentum
                self.running_mean = m * self.running_mean + (1 - m) * mean
                self.running_var = m * self.running_var + (1 - m) * var
        else:
            if self.running_mean is None:
                raise StatisticsError("batchnorm used in inference mode before any training step")
            mean, var = self.running_mean, self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean) * inv_std
        self._cache = (xhat, inv_std, training)
        return xhat * self.params["gamma"] + self.params["beta"]

    def backward(self, grad):
        xhat, inv_std, training = self._cache
        axes = tuple(range(grad.ndim - 1))
        self.grads["gamma"] = (grad * xhat).sum(axis=axes)
        self.grads["beta"] = grad.sum(axis=axes)
        dxhat = grad * self.params["gamma"]
        if not training:
            return dxhat * inv_std
        m = xhat.size // xhat.shape[-1]
        return (inv_std / m) * (
            m * dxhat - dxhat.sum(axis=axes) - xhat * (dxhat * xhat).sum(axis=axes)
        )

    def state(self):
        if self.running_mean is None:
            return {}
        return {"running_mean": self.running_mean, "running_var": self.running_var}

    def load_state(self, state):
        if "running_mean" in state:
            self.running_mean = np.array(state["running_mean"])
            self.running_var = np.array(state["running_var"])


class Activation(Layer):
    def __init__(self, kind):
        super().__init__()
        if kind not in ACTIVATIONS:
            raise ValueError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}")
        self.kind = kind
        self._x = None
        self._y = None

    def forward(self, x, training=False):
        self._x = x
        self._y = activation(x, self.kind)
        return self._y

    def backward(self, grad):
        if self.kind == "elu":
            return grad * np.where(self._x > 0, 1.0, self._y + 1.0)
        if self.kind == "relu":
            return grad * (self._x > 0)
        if self.kind == "linear":
            return grad
        s = self._y
        return s * (grad - (grad * s).sum(axis=-1, keepdims=True))


class Sequential:
    """Ordered stack of layers with flat ``"<index>.<name>"`` parameter naming."""

    def __init__(self, layers):
        self.layers = list(layers)

    def forward(self, x, training=False):
        for layer in self.layers:
            x = layer.forward(x, training)
        return x

    __call__ = forward

    def backward(self, grad):
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def named_params(self):
        return {
            f"{i}.{name}": arr
            for i, layer in enumerate(self.layers)
            for name, arr in layer.params.items()
        }

    def named_grads(self):
        return {
            f"{i}.{name}": arr
            for i, layer in enumerate(self.layers)
            for name, arr in layer.grads.items()
        }

    def named_state(self):
        return {
            f"{i}.{name}": arr
            for i, layer in enumerate(self.layers)
            for name, arr in layer.state().items()
        }

    def load_named_state(self, state):
        for i, layer in enumerate(self.layers):
            prefix = f"{i}."
            sub = {k[len(prefix):]: v for k, v in state.items() if k.startswith(prefix)}
            if sub:
                layer.load_state(sub)

    def describe(self):
        return [(i, layer.kind) for i, layer in enumerate(self.layers)]
