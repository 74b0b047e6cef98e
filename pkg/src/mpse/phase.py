"""Phase arithmetic: anti-wrapping, principal-value wrapping, phase
differentials, and the magnitude-weighted phase-distance metric.

Phase grids are (T, F) float arrays in radians. Differential operators
are plain first differences, so the output shrinks by one along the
differenced axis (no boundary padding is invented).
"""

from __future__ import annotations

import numpy as np


def _round_half_away(x: np.ndarray) -> np.ndarray:
    # ties at .5 go away from zero (np.round would go to even)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def anti_wrap(t) -> np.ndarray:
    """Principal angular distance |t - 2*pi*round(t/(2*pi))|.

    Maps any phase difference into [0, pi]; 2*pi-periodic and even in t.
    """
    t = np.asarray(t, dtype=np.float64)
    two_pi = 2.0 * np.pi
    return np.abs(t - two_pi * _round_half_away(t / two_pi))


def anti_wrap_grad(t) -> np.ndarray:
    """Subgradient of :func:`anti_wrap`: sign of the wrapped residual.

    Zero at the kinks (residual 0 or +/-pi), the midpoint of the
    one-sided slopes.
    """
    t = np.asarray(t, dtype=np.float64)
    two_pi = 2.0 * np.pi
    r = t - two_pi * _round_half_away(t / two_pi)
    return np.where(np.abs(r) == np.pi, 0.0, np.sign(r))


def wrap_to_principal(t) -> np.ndarray:
    """Wrap phases into (-pi, pi], congruent to the input modulo 2*pi."""
    t = np.asarray(t, dtype=np.float64)
    two_pi = 2.0 * np.pi
    w = t - two_pi * np.ceil(t / two_pi - 0.5)
    # ceil maps the boundary -pi to itself; fold it to +pi
    w = np.where(w <= -np.pi, w + two_pi, w)
    return w


def diff_freq(P: np.ndarray) -> np.ndarray:
    """First difference along the frequency axis: out[.., f] = P[.., f+1] - P[.., f]."""
    P = np.asarray(P)
    if P.shape[-1] < 2:
        raise ValueError(f"need at least 2 frequency bins, got {P.shape[-1]}")
    return np.diff(P, axis=-1)


def diff_time(P: np.ndarray) -> np.ndarray:
    """First difference along the time axis: out[.., t, :] = P[.., t+1, :] - P[.., t, :]."""
    P = np.asarray(P)
    if P.shape[-2] < 2:
        raise ValueError(f"need at least 2 frames, got {P.shape[-2]}")
    return np.diff(P, axis=-2)


def phase_distance(X_m: np.ndarray, X_p: np.ndarray, Xhat_p: np.ndarray) -> float:
    """Magnitude-weighted mean anti-wrapped phase error, in degrees.

    Weights are the target magnitudes normalized to sum to one, so the
    result lies in [0, 180] and is invariant to rescaling X_m.
    """
    X_m = np.asarray(X_m, dtype=np.float64)
    X_p = np.asarray(X_p, dtype=np.float64)
    Xhat_p = np.asarray(Xhat_p, dtype=np.float64)
    if not (X_m.shape == X_p.shape == Xhat_p.shape):
        raise ValueError(
            f"shape mismatch: {X_m.shape} vs {X_p.shape} vs {Xhat_p.shape}"
        )
    total = X_m.sum()
    if total <= 0:
        raise ValueError("undefined weights: magnitude spectrum is all zero")
    w = X_m / total
    return float((180.0 / np.pi) * np.sum(w * anti_wrap(X_p - Xhat_p)))
