"""Inference-only network primitives on numpy arrays.

Feature maps are (B, C, T, F) float32 tensors; sequence ops take
(B, L, D). Everything is a pure function of (input, weights), computed
in single precision.
"""

from __future__ import annotations

import numpy as np


def conv2d(
    x: np.ndarray,
    weight: np.ndarray,
    bias: np.ndarray | None = None,
    stride: tuple[int, int] = (1, 1),
    dilation: tuple[int, int] = (1, 1),
    padding: tuple[int, int] = (0, 0),
) -> np.ndarray:
    """2-D cross-correlation of (B, Cin, T, F) with (Cout, Cin, kt, kf).

    Zero padding; output sizes follow the usual floor formula. Implemented
    as a sum of per-tap matmuls so BLAS does the channel contraction.
    """
    x = np.asarray(x)
    weight = np.asarray(weight)
    if x.ndim != 4 or weight.ndim != 4:
        raise ValueError(f"conv2d expects 4-D input/weight, got {x.shape} / {weight.shape}")
    B, Cin, T, F = x.shape
    Cout, Cw, kt, kf = weight.shape
    if Cw != Cin:
        raise ValueError(f"conv2d channel mismatch: input {Cin}, weight expects {Cw}")
    (st, sf), (dt, df), (pt, pf) = stride, dilation, padding

    To = (T + 2 * pt - dt * (kt - 1) - 1) // st + 1
    Fo = (F + 2 * pf - df * (kf - 1) - 1) // sf + 1
    if To < 1 or Fo < 1:
        raise ValueError(f"conv2d output would be empty: input {(T, F)}, kernel {(kt, kf)}")

    xp = np.pad(x, ((0, 0), (0, 0), (pt, pt), (pf, pf)))
    xp = np.ascontiguousarray(xp.transpose(0, 2, 3, 1))  # (B, T', F', Cin)

    out = np.zeros((B, To, Fo, Cout), dtype=np.float32)
    for i in range(kt):
        t0 = i * dt
        for j in range(kf):
            f0 = j * df
            tap = xp[:, t0 : t0 + (To - 1) * st + 1 : st, f0 : f0 + (Fo - 1) * sf + 1 : sf, :]
            out += tap @ weight[:, :, i, j].T
    if bias is not None:
        out += bias
    return np.ascontiguousarray(out.transpose(0, 3, 1, 2))


def instance_norm(
    x: np.ndarray, gamma: np.ndarray, beta: np.ndarray, eps: float = 1e-5
) -> np.ndarray:
    """Normalize each (batch, channel) slice over (T, F) to zero mean and
    unit variance, then apply the per-channel affine transform."""
    mean = x.mean(axis=(2, 3), keepdims=True)
    var = x.var(axis=(2, 3), keepdims=True)
    xn = (x - mean) / np.sqrt(var + np.float32(eps))
    return xn * gamma.reshape(1, -1, 1, 1) + beta.reshape(1, -1, 1, 1)


def layer_norm(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Normalize over the last (feature) axis with affine parameters."""
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + np.float32(eps)) * gamma + beta


def prelu(x: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """x where x >= 0, alpha*x otherwise; alpha is per-channel for feature
    maps ((C,) against axis 1) or a scalar/broadcastable array."""
    alpha = np.asarray(alpha, dtype=x.dtype)
    if x.ndim == 4 and alpha.ndim == 1 and alpha.shape[0] == x.shape[1]:
        alpha = alpha.reshape(1, -1, 1, 1)
    return np.where(x >= 0, x, alpha * x)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    # split by sign to stay overflow-free in float32
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def lsigmoid(x: np.ndarray, alpha: np.ndarray, beta: float = 2.0) -> np.ndarray:
    """Learnable sigmoid beta / (1 + exp(1 - alpha*x)) with per-frequency
    alpha applied along the last axis; output in (0, beta)."""
    alpha = np.asarray(alpha, dtype=x.dtype)
    if alpha.shape[-1] != x.shape[-1]:
        raise ValueError(f"alpha length {alpha.shape[-1]} != frequency bins {x.shape[-1]}")
    return np.asarray(beta, dtype=x.dtype) * sigmoid(alpha * x - 1.0)


def linear(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Affine map on the last axis: x @ weight.T + bias."""
    return x @ weight.T + bias


def pixel_shuffle_freq(x: np.ndarray, r: int = 2) -> np.ndarray:
    """Rearrange (B, r*C, T, F) -> (B, C, T, r*F).

    Input channel c*r + k feeds output channel c at frequency offset k,
    a bijective move of the channel/width product.
    """
    B, C, T, F = x.shape
    if C % r != 0:
        raise ValueError(f"channels {C} not divisible by upsample factor {r}")
    out = x.reshape(B, C // r, r, T, F).transpose(0, 1, 3, 4, 2)  # (B, C/r, T, F, r)
    return np.ascontiguousarray(out.reshape(B, C // r, T, F * r))


def gru_layer(
    x: np.ndarray,
    w_ih: np.ndarray,
    w_hh: np.ndarray,
    b_ih: np.ndarray,
    b_hh: np.ndarray,
    reverse: bool = False,
) -> np.ndarray:
    """Single-direction GRU over (B, L, D) with zero initial state.

    Gate layout follows the stacked (reset, update, candidate) convention:
    w_ih is (3H, D), w_hh is (3H, H), and the candidate's recurrent term
    is gated by reset before the tanh.
    """
    B, L, D = x.shape
    H = w_hh.shape[1]
    if reverse:
        x = x[:, ::-1, :]
    gates_in = x @ w_ih.T + b_ih  # (B, L, 3H)
    h = np.zeros((B, H), dtype=x.dtype)
    out = np.empty((B, L, H), dtype=x.dtype)
    for t in range(L):
        g = gates_in[:, t, :]
        gh = h @ w_hh.T + b_hh
        r = sigmoid(g[:, :H] + gh[:, :H])
        z = sigmoid(g[:, H : 2 * H] + gh[:, H : 2 * H])
        n = np.tanh(g[:, 2 * H :] + r * gh[:, 2 * H :])
        h = (1.0 - z) * n + z * h
        out[:, t, :] = h
    if reverse:
        out = out[:, ::-1, :]
    return out


def bigru(x: np.ndarray, fwd: dict, bwd: dict) -> np.ndarray:
    """Bidirectional GRU: concatenate forward and backward passes."""
    f = gru_layer(x, fwd["w_ih"], fwd["w_hh"], fwd["b_ih"], fwd["b_hh"])
    b = gru_layer(x, bwd["w_ih"], bwd["w_hh"], bwd["b_ih"], bwd["b_hh"], reverse=True)
    return np.concatenate([f, b], axis=-1)


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    x = x - x.max(axis=axis, keepdims=True)
    e = np.exp(x)
    return e / e.sum(axis=axis, keepdims=True)


def mhsa(
    x: np.ndarray,
    wq: np.ndarray, bq: np.ndarray,
    wk: np.ndarray, bk: np.ndarray,
    wv: np.ndarray, bv: np.ndarray,
    wo: np.ndarray, bo: np.ndarray,
    n_heads: int,
) -> np.ndarray:
    """Multi-head scaled dot-product self-attention on (B, L, D).

    No positional encoding anywhere; heads are split from the model
    dimension, attended independently, and re-merged by the output
    projection.
    """
    B, L, D = x.shape
    if D % n_heads != 0:
        raise ValueError(f"model dim {D} not divisible by {n_heads} heads")
    dh = D // n_heads

    def split(h):
        return h.reshape(B, L, n_heads, dh).transpose(0, 2, 1, 3)  # (B, M, L, dh)

    q = split(x @ wq.T + bq)
    k = split(x @ wk.T + bk)
    v = split(x @ wv.T + bv)
    scores = q @ k.transpose(0, 1, 3, 2) / np.float32(np.sqrt(dh))
    att = softmax(scores, axis=-1) @ v  # (B, M, L, dh)
    merged = att.transpose(0, 2, 1, 3).reshape(B, L, D)
    return merged @ wo.T + bo
