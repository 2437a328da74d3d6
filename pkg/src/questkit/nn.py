"""Dense-array neural kernel: forward and analytic backward passes for the
layers the classifier needs, plus Adam and a finite-difference gradient
checker.  Everything is float64; models here are desk-scale, so gradient
checks beat speed.

Shape conventions
-----------------
conv input        x (batch, channels, max_len, dim)
conv weights      w (filters, channels, window, dim), bias (filters,)
feature maps      (batch, filters, max_len - window + 1)
dense input       (batch, features)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import NumericError


def check_finite(x: np.ndarray, what: str = "array") -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise NumericError(f"{what} contains NaN or Inf")
    return x


# ---------------------------------------------------------------------------
# convolution over channel-summed word windows

@dataclass
class ConvFilter:
    """One convolution filter: per-channel (window x dim) weight blocks,
    summed across channels at application, plus a scalar bias."""

    window: int
    weights: np.ndarray  # (channels, window, dim)
    bias: float = 0.0

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 3 or self.weights.shape[1] != self.window:
            raise NumericError(
                f"filter weights must be (channels, {self.window}, dim); "
                f"got {self.weights.shape}"
            )


def sliding_windows(x: np.ndarray, window: int) -> np.ndarray:
    """(B, C, L, window, dim) strided view over the time axis, L = n-window+1."""
    b, c, n, k = x.shape
    if window > n:
        raise NumericError(f"window {window} exceeds padded length {n}")
    length = n - window + 1
    sb, sc, sn, sk = x.strides
    return np.lib.stride_tricks.as_strided(
        x, shape=(b, c, length, window, k), strides=(sb, sc, sn, sn, sk),
        writeable=False,
    )


def conv_raw(x: np.ndarray, w: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Pre-activation feature maps: channel-summed window dot products + bias."""
    if x.shape[1] != w.shape[1]:
        raise NumericError(
            f"input has {x.shape[1]} channels, filter expects {w.shape[1]}"
        )
    windows = sliding_windows(x, w.shape[2])
    out = np.einsum("bcihk,fchk->bfi", windows, w, optimize=True)
    return out + bias[None, :, None]


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(grad: np.ndarray, x: np.ndarray) -> np.ndarray:
    return grad * (x > 0.0)


def tanh_backward(grad: np.ndarray, y: np.ndarray) -> np.ndarray:
    return grad * (1.0 - y * y)


def conv_backward(
    grad: np.ndarray, x: np.ndarray, w: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of conv_raw: (dx, dw, dbias) for grad of shape (B, f, L)."""
    windows = sliding_windows(x, w.shape[2])
    dw = np.einsum("bcihk,bfi->fchk", windows, grad, optimize=True)
    dbias = grad.sum(axis=(0, 2))
    dx = np.zeros_like(x)
    length = grad.shape[2]
    for off in range(w.shape[2]):
        dx[:, :, off:off + length, :] += np.einsum(
            "bfi,fck->bcik", grad, w[:, :, off, :], optimize=True
        )
    return dx, dw, dbias


def conv_forward(channels: list[np.ndarray], filt: ConvFilter,
                 activation: str = "relu") -> np.ndarray:
    """Single-sentence feature map of length n - window + 1.

    channels: list of (n x dim) matrices, one per channel; responses are
    summed across channels, biased once, then passed through the activation.
    """
    stack = np.stack(channels)[None]  # (1, C, n, k)
    raw = conv_raw(stack, filt.weights[None], np.array([filt.bias]))[0, 0]
    if activation == "relu":
        return relu(raw)
    if activation == "tanh":
        return np.tanh(raw)
    if activation == "none":
        return raw
    raise NumericError(f"unknown activation {activation!r}")


# ---------------------------------------------------------------------------
# max-over-time pooling

def maxpool_time(feature_map: np.ndarray) -> float:
    """Maximum of a 1-D feature map."""
    fm = np.asarray(feature_map)
    if fm.size == 0:
        raise NumericError("cannot max-pool an empty feature map")
    return float(fm.max())


def maxpool_batch(maps: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(values, argmax) over the last axis; ties resolve to the first index."""
    if maps.shape[-1] == 0:
        raise NumericError("cannot max-pool an empty feature map")
    idx = np.argmax(maps, axis=-1)
    vals = np.take_along_axis(maps, idx[..., None], axis=-1)[..., 0]
    return vals, idx


def maxpool_backward(grad: np.ndarray, maps_shape: tuple, idx: np.ndarray) -> np.ndarray:
    out = np.zeros(maps_shape)
    np.put_along_axis(out, idx[..., None], grad[..., None], axis=-1)
    return out


# ---------------------------------------------------------------------------
# dense layer and softmax cross-entropy

def dense_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    return x @ w + b


def dense_backward(
    grad: np.ndarray, x: np.ndarray, w: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return grad @ w.T, x.T @ grad, grad.sum(axis=0)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_xent(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch via a stable log-sum-exp.

    Returns (loss, dlogits); dlogits already carries the 1/batch factor.
    """
    logits = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    labels = np.atleast_1d(np.asarray(labels))
    check_finite(logits, "logits")
    n, k = logits.shape
    if labels.min() < 0 or labels.max() >= k:
        raise NumericError(f"label out of range for {k} classes")
    m = logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(logits - m).sum(axis=1)) + m[:, 0]
    loss = float((lse - logits[np.arange(n), labels]).mean())
    probs = softmax(logits)
    grad = probs.copy()
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n


# ---------------------------------------------------------------------------
# dropout

def dropout(x: np.ndarray, rate: float, training: bool,
            rng: Optional[np.random.Generator] = None) -> tuple[np.ndarray, Optional[np.ndarray]]:
    """Inverted-scaling elementwise dropout; identity when not training."""
    if not 0.0 <= rate < 1.0:
        raise NumericError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x, None
    if rng is None:
        raise NumericError("training-mode dropout needs a generator")
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * mask, mask


def embedding_dropout(x: np.ndarray, rate: float, training: bool,
                      rng: Optional[np.random.Generator] = None
                      ) -> tuple[np.ndarray, Optional[np.ndarray]]:
    """Drop whole token rows: the same positions are zeroed in every channel.

    x is (batch, channels, max_len, dim); the mask is (batch, max_len) with
    inverted scaling so the expectation matches the input.
    """
    if not 0.0 <= rate < 1.0:
        raise NumericError(f"embedding dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x, None
    if rng is None:
        raise NumericError("training-mode dropout needs a generator")
    mask = (rng.random((x.shape[0], x.shape[2])) >= rate) / (1.0 - rate)
    return x * mask[:, None, :, None], mask


# ---------------------------------------------------------------------------
# batch normalization

@dataclass
class BatchNormState:
    """Scale/shift parameters plus running statistics for one BN layer."""

    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.1
    eps: float = 1e-5

    @classmethod
    def create(cls, n_features: int, momentum: float = 0.1,
               eps: float = 1e-5) -> "BatchNormState":
        return cls(
            gamma=np.ones(n_features),
            beta=np.zeros(n_features),
            running_mean=np.zeros(n_features),
            running_var=np.ones(n_features),
            momentum=momentum,
            eps=eps,
        )


def batchnorm_forward(x: np.ndarray, state: BatchNormState, training: bool,
                      update_running: bool = True) -> tuple[np.ndarray, Optional[dict]]:
    """Normalize each feature over the batch axis, then scale and shift.

    Training mode uses batch statistics (biased variance) and, unless
    update_running is off (gradient checks), folds them into the running
    stats.  Eval mode applies the frozen running statistics.
    """
    if x.ndim != 2:
        raise NumericError(f"batchnorm expects (batch, features), got {x.shape}")
    if training:
        if x.shape[0] < 2:
            raise NumericError("training-mode batch norm needs batch >= 2")
        mean = x.mean(axis=0)
        var = x.var(axis=0)
        xhat = (x - mean) / np.sqrt(var + state.eps)
        out = state.gamma * xhat + state.beta
        if update_running:
            m = state.momentum
            state.running_mean = (1 - m) * state.running_mean + m * mean
            state.running_var = (1 - m) * state.running_var + m * var
        cache = {"xhat": xhat, "var": var, "gamma": state.gamma,
                 "eps": state.eps}
        return out, cache
    xhat = (x - state.running_mean) / np.sqrt(state.running_var + state.eps)
    return state.gamma * xhat + state.beta, None


def batchnorm_backward(grad: np.ndarray, cache: dict
                       ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(dx, dgamma, dbeta) through training-mode batch statistics."""
    xhat, var, gamma, eps = cache["xhat"], cache["var"], cache["gamma"], cache["eps"]
    n = grad.shape[0]
    dbeta = grad.sum(axis=0)
    dgamma = (grad * xhat).sum(axis=0)
    dxhat = grad * gamma
    inv_std = 1.0 / np.sqrt(var + eps)
    dx = (inv_std / n) * (
        n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0)
    )
    return dx, dgamma, dbeta


def spatial_batchnorm_forward(x: np.ndarray, state: BatchNormState,
                              training: bool, update_running: bool = True
                              ) -> tuple[np.ndarray, Optional[dict]]:
    """Per-filter normalization of (batch, filters, time) maps over batch x time."""
    if x.ndim != 3:
        raise NumericError(
            f"spatial batchnorm expects (batch, filters, time), got {x.shape}"
        )
    b, f, t = x.shape
    flat = x.transpose(0, 2, 1).reshape(b * t, f)
    if training and flat.shape[0] < 2:
        raise NumericError("training-mode batch norm needs batch >= 2")
    out, cache = batchnorm_forward(flat, state, training, update_running)
    return out.reshape(b, t, f).transpose(0, 2, 1), cache


def spatial_batchnorm_backward(grad: np.ndarray, cache: dict
                               ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    b, f, t = grad.shape
    flat = grad.transpose(0, 2, 1).reshape(b * t, f)
    dx, dgamma, dbeta = batchnorm_backward(flat, cache)
    return dx.reshape(b, t, f).transpose(0, 2, 1), dgamma, dbeta


# ---------------------------------------------------------------------------
# Adam

@dataclass
class AdamState:
    """First/second moment estimates per parameter, with the usual defaults."""

    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: AdamState) -> None:
    """One bias-corrected Adam update, in place on the parameter arrays."""
    state.step += 1
    t = state.step
    for name, g in grads.items():
        p = params[name]
        if g.shape != p.shape:
            raise NumericError(
                f"gradient shape {g.shape} does not match parameter "
                f"{name!r} shape {p.shape}"
            )
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        state.m[name] = state.beta1 * state.m[name] + (1 - state.beta1) * g
        state.v[name] = state.beta2 * state.v[name] + (1 - state.beta2) * g * g
        m_hat = state.m[name] / (1 - state.beta1 ** t)
        v_hat = state.v[name] / (1 - state.beta2 ** t)
        p -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


# ---------------------------------------------------------------------------
# gradient checking

def grad_check(
    loss_and_grads: Callable[[], tuple[float, dict[str, np.ndarray]]],
    params: dict[str, np.ndarray],
    step: float = 1e-5,
) -> dict[str, float]:
    """Compare analytic gradients against central finite differences.

    loss_and_grads must be deterministic (dropout off, batch norm without
    running-stat updates).  Returns the max elementwise relative error
    |ga - gn| / max(1, |ga| + |gn|) per parameter.
    """
    loss, analytic = loss_and_grads()
    if not np.isfinite(loss):
        raise NumericError("gradient check: non-finite loss")
    errors: dict[str, float] = {}
    for name, p in params.items():
        ga = analytic[name]
        worst = 0.0
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            ix = it.multi_index
            orig = p[ix]
            p[ix] = orig + step
            plus, _ = loss_and_grads()
            p[ix] = orig - step
            minus, _ = loss_and_grads()
            p[ix] = orig
            gn = (plus - minus) / (2 * step)
            denom = max(1.0, abs(ga[ix]) + abs(gn))
            worst = max(worst, abs(ga[ix] - gn) / denom)
        errors[name] = worst
    return errors
