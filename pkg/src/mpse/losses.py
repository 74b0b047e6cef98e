"""Training objectives over predicted compressed magnitude and phase grids.

Every expectation is realized as the arithmetic mean over all grid
elements (batch included when present), so the loss weights stay
comparable across shapes. Value-and-gradient pairs are returned where an
analytic gradient exists; a central finite-difference checker is
provided to verify them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .phase import anti_wrap, anti_wrap_grad, diff_freq, diff_time
from .spectral import StftConfig, consistency_project


@dataclass(frozen=True)
class LossWeights:
    """Coefficients of the generator objective."""

    mag: float = 0.9
    pha: float = 0.3
    com: float = 0.1
    con: float = 0.1
    metric: float = 0.05

    def __post_init__(self):
        for name in ("mag", "pha", "com", "con", "metric"):
            if getattr(self, name) < 0:
                raise ValueError(f"loss weight {name} must be non-negative")


_REPORT_FIELDS = ("mag", "ip", "gd", "iaf", "pha", "com", "con", "metric", "total")


@dataclass
class LossReport:
    """Per-term loss values plus optional gradients w.r.t. the predictions."""

    mag: float
    ip: float
    gd: float
    iaf: float
    pha: float
    com: float
    con: float
    metric: float
    total: float
    grad_mag_c: np.ndarray | None = None
    grad_phase: np.ndarray | None = None

    def to_text(self) -> str:
        """Flat name=value serialization, 17 significant digits per line."""
        return "".join(f"{k}={getattr(self, k):.17g}\n" for k in _REPORT_FIELDS)

    @classmethod
    def from_text(cls, text: str) -> "LossReport":
        values = {}
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            key, _, raw = line.partition("=")
            values[key] = float(raw)
        missing = [k for k in _REPORT_FIELDS if k not in values]
        if missing:
            raise ValueError(f"loss report text missing fields: {missing}")
        return cls(**{k: values[k] for k in _REPORT_FIELDS})


def _check_same_shape(a: np.ndarray, b: np.ndarray, what: str):
    if a.shape != b.shape:
        raise ValueError(f"{what}: shape mismatch {a.shape} vs {b.shape}")


def loss_magnitude(Xc: np.ndarray, Xhat_c: np.ndarray) -> tuple[float, np.ndarray]:
    """MSE between compressed magnitude grids, with gradient w.r.t. Xhat_c."""
    Xc = np.asarray(Xc, dtype=np.float64)
    Xhat_c = np.asarray(Xhat_c, dtype=np.float64)
    _check_same_shape(Xc, Xhat_c, "loss_magnitude")
    d = Xc - Xhat_c
    value = float(np.mean(d**2))
    grad = -2.0 * d / d.size
    return value, grad


class PhaseLoss(NamedTuple):
    """Anti-wrapped phase objective and its additive parts.

    ``total = ip + gd + iaf``; ``grad`` is the subgradient of the total
    w.r.t. the predicted phase grid.
    """

    ip: float
    gd: float
    iaf: float
    total: float
    grad: np.ndarray


def loss_phase(X_p: np.ndarray, Xhat_p: np.ndarray) -> PhaseLoss:
    """Instantaneous-phase, group-delay, and angular-frequency losses.

    Each term is the mean anti-wrapped error of the raw phase difference
    and of its first differences along frequency and time.
    """
    X_p = np.asarray(X_p, dtype=np.float64)
    Xhat_p = np.asarray(Xhat_p, dtype=np.float64)
    _check_same_shape(X_p, Xhat_p, "loss_phase")
    if X_p.shape[-1] < 2 or X_p.shape[-2] < 2:
        raise ValueError(f"loss_phase needs T >= 2 and F >= 2, got shape {X_p.shape}")

    d = X_p - Xhat_p
    ip = float(np.mean(anti_wrap(d)))
    grad = -anti_wrap_grad(d) / d.size

    df = diff_freq(d)
    gd = float(np.mean(anti_wrap(df)))
    s = anti_wrap_grad(df) / df.size
    # adjoint of the frequency first-difference, with d(d)/d(Xhat_p) = -1
    g = np.zeros_like(d)
    g[..., :, 1:] += s
    g[..., :, :-1] -= s
    grad += -g

    dt = diff_time(d)
    iaf = float(np.mean(anti_wrap(dt)))
    s = anti_wrap_grad(dt) / dt.size
    g = np.zeros_like(d)
    g[..., 1:, :] += s
    g[..., :-1, :] -= s
    grad += -g

    return PhaseLoss(ip=ip, gd=gd, iaf=iaf, total=ip + gd + iaf, grad=grad)


def loss_complex(
    X: np.ndarray, Xhat_m: np.ndarray, Xhat_p: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """MSE over real and imaginary parts of X vs Xhat_m * exp(1j*Xhat_p).

    Returns (value, grad w.r.t. Xhat_m, grad w.r.t. Xhat_p), with the
    gradients chained through (m*cos p, m*sin p).
    """
    X = np.asarray(X)
    Xhat_m = np.asarray(Xhat_m, dtype=np.float64)
    Xhat_p = np.asarray(Xhat_p, dtype=np.float64)
    _check_same_shape(X, Xhat_m, "loss_complex")
    _check_same_shape(Xhat_m, Xhat_p, "loss_complex")

    cos_p, sin_p = np.cos(Xhat_p), np.sin(Xhat_p)
    dr = Xhat_m * cos_p - X.real
    di = Xhat_m * sin_p - X.imag
    n = Xhat_m.size
    value = float(np.mean(dr**2) + np.mean(di**2))
    grad_m = 2.0 * (dr * cos_p + di * sin_p) / n
    grad_p = 2.0 * (-dr * Xhat_m * sin_p + di * Xhat_m * cos_p) / n
    return value, grad_m, grad_p


def loss_consistency(Xhat_m: np.ndarray, Xhat_p: np.ndarray, cfg: StftConfig) -> float:
    """Distance of Xhat_m * exp(1j*Xhat_p) from its consistency projection.

    Value only: differentiating would need the projection adjoint, which
    is out of scope without training.
    """
    Xhat_m = np.asarray(Xhat_m, dtype=np.float64)
    Xhat_p = np.asarray(Xhat_p, dtype=np.float64)
    _check_same_shape(Xhat_m, Xhat_p, "loss_consistency")
    S = Xhat_m * np.exp(1j * Xhat_p)
    d = S - consistency_project(S, cfg)
    return float(np.mean(d.real**2) + np.mean(d.imag**2))


def clamp_quality(q: float) -> float:
    """Clamp a raw quality score into [0, 1] (QualityOracle contract)."""
    return float(min(1.0, max(0.0, q)))


class ConstantDiscriminator:
    """Reference discriminator returning a fixed score; test plumbing."""

    def __init__(self, score: float = 1.0):
        self.score = clamp_quality(score)

    def __call__(self, reference, estimate) -> float:
        return self.score


def loss_discriminator(D: Callable, x, xhat, Q: float) -> float:
    """Discriminator objective (D(x,x) - 1)^2 + (D(x,xhat) - Q)^2, Q in [0,1]."""
    if not 0.0 <= Q <= 1.0:
        raise ValueError(f"quality score Q must be in [0, 1], got {Q}")
    return float((D(x, x) - 1.0) ** 2 + (D(x, xhat) - Q) ** 2)


def loss_metric(D: Callable, x, xhat) -> float:
    """Generator-side surrogate quality loss (D(x,xhat) - 1)^2."""
    return float((D(x, xhat) - 1.0) ** 2)


def loss_generator_total(
    mag: float,
    ip: float,
    gd: float,
    iaf: float,
    com: float,
    con: float,
    metric: float,
    weights: LossWeights = LossWeights(),
    grad_mag_c: np.ndarray | None = None,
    grad_phase: np.ndarray | None = None,
) -> LossReport:
    """Assemble the weighted generator objective into a LossReport."""
    pha = ip + gd + iaf
    total = (
        weights.mag * mag
        + weights.pha * pha
        + weights.com * com
        + weights.con * con
        + weights.metric * metric
    )
    return LossReport(
        mag=mag, ip=ip, gd=gd, iaf=iaf, pha=pha, com=com, con=con,
        metric=metric, total=total, grad_mag_c=grad_mag_c, grad_phase=grad_phase,
    )


def spectrum_loss_report(
    X: np.ndarray,
    Xhat_m: np.ndarray,
    Xhat_p: np.ndarray,
    cfg: StftConfig,
    weights: LossWeights = LossWeights(),
    metric: float = 0.0,
) -> LossReport:
    """All spectrum-based losses between a target complex spectrum and a
    predicted (magnitude, phase) pair; the metric term is injected."""
    X = np.asarray(X)
    X_m, X_p = np.abs(X), np.angle(X)
    c = cfg.compression
    mag, grad_mag_c = loss_magnitude(X_m**c, np.asarray(Xhat_m, dtype=np.float64) ** c)
    ph = loss_phase(X_p, Xhat_p)
    com, _, _ = loss_complex(X, Xhat_m, Xhat_p)
    con = loss_consistency(Xhat_m, Xhat_p, cfg)
    return loss_generator_total(
        mag, ph.ip, ph.gd, ph.iaf, com, con, metric, weights,
        grad_mag_c=grad_mag_c, grad_phase=ph.grad,
    )


def fd_gradient_check(
    loss_fn: Callable[[np.ndarray], tuple[float, np.ndarray]],
    point: np.ndarray,
    h: float = 1e-6,
) -> float:
    """Compare an analytic gradient with central finite differences.

    ``loss_fn`` maps an array to (value, gradient). Returns the max
    elementwise relative error with denominator max(|analytic|, |fd|, 1e-8).
    The caller is responsible for sampling points away from kinks.
    """
    point = np.asarray(point, dtype=np.float64)
    _, grad = loss_fn(point)
    grad = np.asarray(grad, dtype=np.float64)
    fd = np.empty_like(point)
    it = np.nditer(point, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        p = point.copy()
        p[idx] = point[idx] + h
        fp, _ = loss_fn(p)
        p[idx] = point[idx] - h
        fm, _ = loss_fn(p)
        fd[idx] = (fp - fm) / (2.0 * h)
    denom = np.maximum(np.maximum(np.abs(grad), np.abs(fd)), 1e-8)
    return float(np.max(np.abs(grad - fd) / denom))
