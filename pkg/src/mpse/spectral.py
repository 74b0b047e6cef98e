"""Waveform <-> time-frequency conversions.

Centered STFT with reflect padding, exactly-invertible iSTFT via
squared-window overlap-add, polar decomposition, power-law magnitude
compression, and the consistency projection (STFT of iSTFT).

All arithmetic here is double precision. Spectra are plain complex/real
arrays of shape (T, F) with T analysis frames and F = n_fft//2 + 1
one-sided frequency bins.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class SpectralError(ValueError):
    """Raised for invalid waveforms, spectra, or analysis configs."""


@dataclass
class Waveform:
    """Mono audio samples with their sample rate.

    Samples are stored as a 1-D float64 array, nominally in [-1, 1].
    Construction rejects non-finite samples and non-positive rates.
    """

    samples: np.ndarray
    sample_rate: int = 16000

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise SpectralError(f"waveform must be 1-D, got shape {self.samples.shape}")
        if not np.all(np.isfinite(self.samples)):
            raise SpectralError("waveform contains NaN or Inf samples")
        if self.sample_rate <= 0:
            raise SpectralError(f"sample_rate must be positive, got {self.sample_rate}")

    def __len__(self):
        return len(self.samples)


def hann_periodic(n: int) -> np.ndarray:
    """Periodic Hann window, 0.5*(1 - cos(2*pi*k/n)) for k = 0..n-1."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


@dataclass(frozen=True)
class StftConfig:
    """Analysis/synthesis parameters shared by the whole pipeline.

    The squared window must satisfy constant overlap-add at the given
    hop (checked to 1e-10 relative) so the iSTFT is an exact inverse.
    """

    n_fft: int = 400
    win_length: int = 400
    hop_length: int = 100
    window: str = "hann"
    center: bool = True
    compression: float = 0.3

    # cached window samples, padded to n_fft
    _win: np.ndarray = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        if not (0 < self.hop_length <= self.win_length <= self.n_fft):
            raise SpectralError(
                f"require 0 < hop ({self.hop_length}) <= win ({self.win_length})"
                f" <= n_fft ({self.n_fft})"
            )
        if self.window != "hann":
            raise SpectralError(f"unsupported window {self.window!r}")
        if not 0.0 < self.compression <= 1.0:
            raise SpectralError(f"compression factor must be in (0, 1], got {self.compression}")
        win = hann_periodic(self.win_length)
        if np.any(win < 0):
            raise SpectralError("window has negative samples")
        if not np.allclose(win[1:], win[1:][::-1], rtol=0, atol=1e-12):
            raise SpectralError("window is not symmetric")
        pad = self.n_fft - self.win_length
        win = np.pad(win, (pad // 2, pad - pad // 2))
        object.__setattr__(self, "_win", win)
        self._check_cola()

    def _check_cola(self):
        # per-phase sum of the squared window at hop offsets must be constant
        wsq = self._win**2
        phases = np.zeros(self.hop_length)
        for start in range(0, self.n_fft, self.hop_length):
            chunk = wsq[start : start + self.hop_length]
            phases[: len(chunk)] += chunk
        dev = (phases.max() - phases.min()) / phases.mean()
        if dev > 1e-10:
            raise SpectralError(
                f"(window^2, hop) violates constant overlap-add: relative deviation {dev:.3e}"
            )

    @property
    def n_bins(self) -> int:
        return self.n_fft // 2 + 1

    @property
    def window_samples(self) -> np.ndarray:
        return self._win.copy()

    def num_frames(self, n_samples: int) -> int:
        if self.center:
            return n_samples // self.hop_length + 1
        return (n_samples - self.win_length) // self.hop_length + 1


def _samples(w) -> np.ndarray:
    if isinstance(w, Waveform):
        return w.samples
    return np.asarray(w, dtype=np.float64)


def stft(w, cfg: StftConfig) -> np.ndarray:
    """Short-time Fourier transform of a waveform.

    With ``center=True`` the signal is reflect-padded by n_fft//2 on both
    sides, so T = len(w)//hop + 1 frames are produced. Returns a complex
    (T, F) grid with F = n_fft//2 + 1.
    """
    x = _samples(w)
    if x.size == 0:
        raise SpectralError("input too short: empty waveform")
    cfgT = cfg.num_frames(len(x))
    if cfgT < 1:
        raise SpectralError(f"input too short: {len(x)} samples for win={cfg.win_length}")
    if cfg.center:
        pad = cfg.n_fft // 2
        x = np.pad(x, pad, mode="reflect") if len(x) > 1 else np.pad(x, pad, mode="edge")
    frames = np.lib.stride_tricks.sliding_window_view(x, cfg.n_fft)[:: cfg.hop_length]
    frames = frames[:cfgT]
    return np.fft.rfft(frames * cfg.window_samples, axis=1)


def istft(S: np.ndarray, cfg: StftConfig, out_len: int | None = None) -> np.ndarray:
    """Inverse STFT by windowed overlap-add with squared-window normalization.

    Exact inverse of :func:`stft` on the retained sample range. The result
    is truncated or zero-padded to ``out_len`` samples; the default is the
    canonical length (T-1)*hop for centered analysis.
    """
    S = np.asarray(S)
    if S.ndim != 2 or S.shape[1] != cfg.n_bins:
        raise SpectralError(f"expected (T, {cfg.n_bins}) spectrum, got shape {S.shape}")
    T = S.shape[0]
    hop, n_fft = cfg.hop_length, cfg.n_fft
    win = cfg.window_samples
    if out_len is None:
        out_len = (T - 1) * hop if cfg.center else (T - 1) * hop + cfg.win_length

    frames = np.fft.irfft(S, n=n_fft, axis=1) * win
    total = (T - 1) * hop + n_fft
    y = np.zeros(total)
    wsq = np.zeros(total)
    win2 = win**2
    for t in range(T):
        y[t * hop : t * hop + n_fft] += frames[t]
        wsq[t * hop : t * hop + n_fft] += win2
    norm = wsq > 1e-11 * wsq.max()
    y[norm] /= wsq[norm]

    if cfg.center:
        y = y[n_fft // 2 : n_fft // 2 + out_len]
    else:
        y = y[:out_len]
    if len(y) < out_len:
        y = np.pad(y, (0, out_len - len(y)))
    return y


def mag_phase(S: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Polar decomposition: (|S|, principal-value angle of S).

    The angle of an exactly-zero entry is 0, so phases always lie in
    (-pi, pi] and magnitude * exp(1j*phase) reproduces S.
    """
    S = np.asarray(S)
    return np.abs(S), np.angle(S)


def compress(M: np.ndarray, c: float) -> np.ndarray:
    """Power-law compression M**c for non-negative magnitudes, c in (0, 1]."""
    M = np.asarray(M, dtype=np.float64)
    if not 0.0 < c <= 1.0:
        raise SpectralError(f"compression factor must be in (0, 1], got {c}")
    if np.any(M < 0):
        raise SpectralError("magnitude spectrum has negative entries")
    return M**c

def decompress(M: np.ndarray, c: float) -> np.ndarray:
    """Inverse of :func:`compress`: M**(1/c)."""
    M = np.asarray(M, dtype=np.float64)
    if not 0.0 < c <= 1.0:
        raise SpectralError(f"compression factor must be in (0, 1], got {c}")
    if np.any(M < 0):
        raise SpectralError("magnitude spectrum has negative entries")
    return M ** (1.0 / c)


def consistency_project(S: np.ndarray, cfg: StftConfig) -> np.ndarray:
    """Project a complex grid onto the set of spectra realizable by waveforms.

    Computes stft(istft(S)) at the canonical waveform length (T-1)*hop.
    Linear and idempotent; spectra of waveforms whose length is a multiple
    of the hop are exact fixed points.
    """
    S = np.asarray(S)
    if S.ndim != 2 or S.shape[1] != cfg.n_bins:
        raise SpectralError(f"expected (T, {cfg.n_bins}) spectrum, got shape {S.shape}")
    T = S.shape[0]
    out_len = (T - 1) * cfg.hop_length if cfg.center else (T - 1) * cfg.hop_length + cfg.win_length
    y = istft(S, cfg, out_len)
    return stft(y, cfg)


def rms(x) -> float:
    """Root-mean-square level of a waveform."""
    s = _samples(x)
    if s.size == 0:
        return 0.0
    return float(np.sqrt(np.mean(s**2)))
