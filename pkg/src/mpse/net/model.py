"""The enhancement network at inference time.

Pipeline: STFT -> compressed magnitude + phase -> encoder -> N cascaded
time/frequency transformer blocks -> parallel magnitude-mask and phase
decoders -> recombine -> iSTFT. The network runs in float32; the
spectral frontend stays in float64.

Weights are looked up by hierarchical dot-separated names from any
mapping (normally a WeightStore); :func:`param_shapes` is the single
source of truth for the parameter inventory.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..spectral import StftConfig, Waveform, compress, decompress, istft, mag_phase, rms, stft
from .layers import (
    bigru,
    conv2d,
    instance_norm,
    layer_norm,
    linear,
    lsigmoid,
    mhsa,
    pixel_shuffle_freq,
    prelu,
    relu,
)

TASK_HEADS = ("bounded_mask", "unbounded_mask")


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters.

    ``task_head`` selects the mask activation: a learnable sigmoid
    bounded by ``beta`` for denoising/dereverberation, an unbounded
    PReLU for bandwidth extension.
    """

    channels: int = 64
    n_blocks: int = 4
    n_heads: int = 4
    dense_dilations: tuple[int, ...] = (1, 2, 4, 8)
    beta: float = 2.0
    task_head: str = "bounded_mask"
    n_bins: int = 201

    def __post_init__(self):
        if self.channels % self.n_heads != 0:
            raise ValueError(
                f"channels ({self.channels}) must be divisible by n_heads ({self.n_heads})"
            )
        if any(b <= a for a, b in zip(self.dense_dilations, self.dense_dilations[1:])):
            raise ValueError(f"dilations must be strictly increasing: {self.dense_dilations}")
        if self.task_head not in TASK_HEADS:
            raise ValueError(f"task_head must be one of {TASK_HEADS}, got {self.task_head!r}")
        if self.n_bins < 2:
            raise ValueError(f"n_bins must be >= 2, got {self.n_bins}")

    @property
    def freq_down(self) -> int:
        """Halved frequency dimension after the encoder's strided conv."""
        return self.n_bins // 2 + 1

    def to_text(self) -> str:
        return (
            f"channels={self.channels}\n"
            f"n_blocks={self.n_blocks}\n"
            f"n_heads={self.n_heads}\n"
            f"dense_dilations={','.join(str(d) for d in self.dense_dilations)}\n"
            f"beta={self.beta:.17g}\n"
            f"task_head={self.task_head}\n"
            f"n_bins={self.n_bins}\n"
        )

    @classmethod
    def from_text(cls, text: str) -> "ModelConfig":
        kv = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, raw = line.partition("=")
            kv[key.strip()] = raw.strip()
        try:
            return cls(
                channels=int(kv["channels"]),
                n_blocks=int(kv["n_blocks"]),
                n_heads=int(kv["n_heads"]),
                dense_dilations=tuple(int(d) for d in kv["dense_dilations"].split(",")),
                beta=float(kv["beta"]),
                task_head=kv["task_head"],
                n_bins=int(kv["n_bins"]),
            )
        except KeyError as e:
            raise ValueError(f"model config text missing key {e.args[0]!r}") from None


def _conv_block_shapes(prefix: str, c_in: int, c_out: int, kt: int, kf: int) -> dict:
    return {
        f"{prefix}.weight": (c_out, c_in, kt, kf),
        f"{prefix}.bias": (c_out,),
        f"{prefix}.norm.gamma": (c_out,),
        f"{prefix}.norm.beta": (c_out,),
        f"{prefix}.act.alpha": (c_out,),
    }


def _dense_shapes(prefix: str, cfg: ModelConfig) -> dict:
    shapes = {}
    C = cfg.channels
    for k in range(1, len(cfg.dense_dilations) + 1):
        shapes.update(
            {
                f"{prefix}.stage{k}.conv.weight": (C, k * C, 3, 3),
                f"{prefix}.stage{k}.conv.bias": (C,),
                f"{prefix}.stage{k}.norm.gamma": (C,),
                f"{prefix}.stage{k}.norm.beta": (C,),
                f"{prefix}.stage{k}.act.alpha": (C,),
            }
        )
    return shapes


def _transformer_shapes(prefix: str, cfg: ModelConfig) -> dict:
    C = cfg.channels
    shapes = {
        f"{prefix}.norm_attn.gamma": (C,),
        f"{prefix}.norm_attn.beta": (C,),
        f"{prefix}.norm_ffn.gamma": (C,),
        f"{prefix}.norm_ffn.beta": (C,),
        f"{prefix}.ffn_out.weight": (C, 2 * C),
        f"{prefix}.ffn_out.bias": (C,),
    }
    for name in ("wq", "wk", "wv", "wo"):
        shapes[f"{prefix}.attn.{name}"] = (C, C)
    for name in ("bq", "bk", "bv", "bo"):
        shapes[f"{prefix}.attn.{name}"] = (C,)
    for direction in ("fwd", "bwd"):
        shapes[f"{prefix}.gru.{direction}.w_ih"] = (3 * C, C)
        shapes[f"{prefix}.gru.{direction}.w_hh"] = (3 * C, C)
        shapes[f"{prefix}.gru.{direction}.b_ih"] = (3 * C,)
        shapes[f"{prefix}.gru.{direction}.b_hh"] = (3 * C,)
    return shapes


def _decoder_shapes(prefix: str, cfg: ModelConfig) -> dict:
    C = cfg.channels
    shapes = _dense_shapes(f"{prefix}.dense", cfg)
    shapes.update(
        {
            f"{prefix}.up.conv.weight": (2 * C, C, 1, 3),
            f"{prefix}.up.conv.bias": (2 * C,),
            f"{prefix}.up.norm.gamma": (C,),
            f"{prefix}.up.norm.beta": (C,),
            f"{prefix}.up.act.alpha": (C,),
        }
    )
    return shapes


def param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Complete (name -> shape) inventory of the model's parameters."""
    C = cfg.channels
    shapes: dict[str, tuple[int, ...]] = {}
    shapes.update(_conv_block_shapes("encoder.conv_in", 2, C, 1, 3))
    shapes.update(_dense_shapes("encoder.dense", cfg))
    shapes.update(_conv_block_shapes("encoder.conv_down", C, C, 1, 3))
    for i in range(cfg.n_blocks):
        shapes.update(_transformer_shapes(f"block{i}.time", cfg))
        shapes.update(_transformer_shapes(f"block{i}.freq", cfg))
    shapes.update(_decoder_shapes("mask", cfg))
    shapes.update({"mask.out.conv.weight": (1, C, 1, 3), "mask.out.conv.bias": (1,)})
    if cfg.task_head == "bounded_mask":
        shapes["mask.out.lsigmoid.alpha"] = (cfg.n_bins,)
    else:
        shapes["mask.out.act.alpha"] = (1,)
    shapes.update(_decoder_shapes("phase", cfg))
    shapes.update(
        {
            "phase.real.weight": (1, C, 1, 3),
            "phase.real.bias": (1,),
            "phase.imag.weight": (1, C, 1, 3),
            "phase.imag.bias": (1,),
        }
    )
    return shapes


def _conv_block(x, ws, prefix, stride=(1, 1)):
    y = conv2d(x, ws[f"{prefix}.weight"], ws[f"{prefix}.bias"], stride=stride, padding=(0, 1))
    y = instance_norm(y, ws[f"{prefix}.norm.gamma"], ws[f"{prefix}.norm.beta"])
    return prelu(y, ws[f"{prefix}.act.alpha"])


def dilated_densenet(x: np.ndarray, ws, prefix: str, cfg: ModelConfig) -> np.ndarray:
    """Densely connected dilated conv stack on a (B, C, T, F) map.

    Stage k convolves the concatenation of the block input and all
    previous stage outputs with a 3x3 kernel dilated by
    ``dense_dilations[k-1]`` along time, padded to preserve (T, F), then
    instance-norms and PReLU-activates. The last stage's C channels are
    the output.
    """
    if x.shape[1] != cfg.channels:
        raise ValueError(f"expected {cfg.channels} input channels, got {x.shape[1]}")
    stack = x
    out = x
    for k, d in enumerate(cfg.dense_dilations, start=1):
        p = f"{prefix}.stage{k}"
        y = conv2d(
            stack,
            ws[f"{p}.conv.weight"],
            ws[f"{p}.conv.bias"],
            dilation=(d, 1),
            padding=(d, 1),
        )
        y = instance_norm(y, ws[f"{p}.norm.gamma"], ws[f"{p}.norm.beta"])
        out = prelu(y, ws[f"{p}.act.alpha"])
        stack = np.concatenate([stack, out], axis=1)
    return out


def transformer_layer(x: np.ndarray, ws, prefix: str, cfg: ModelConfig) -> np.ndarray:
    """Pre-norm transformer layer on (B, L, C) sequences.

    y1 = x + MHSA(LN(x)); y = y1 + Linear(ReLU(BiGRU(LN(y1)))).
    """
    a = layer_norm(x, ws[f"{prefix}.norm_attn.gamma"], ws[f"{prefix}.norm_attn.beta"])
    a = mhsa(
        a,
        ws[f"{prefix}.attn.wq"], ws[f"{prefix}.attn.bq"],
        ws[f"{prefix}.attn.wk"], ws[f"{prefix}.attn.bk"],
        ws[f"{prefix}.attn.wv"], ws[f"{prefix}.attn.bv"],
        ws[f"{prefix}.attn.wo"], ws[f"{prefix}.attn.bo"],
        cfg.n_heads,
    )
    y1 = x + a
    f = layer_norm(y1, ws[f"{prefix}.norm_ffn.gamma"], ws[f"{prefix}.norm_ffn.beta"])
    f = bigru(
        f,
        {k: ws[f"{prefix}.gru.fwd.{k}"] for k in ("w_ih", "w_hh", "b_ih", "b_hh")},
        {k: ws[f"{prefix}.gru.bwd.{k}"] for k in ("w_ih", "w_hh", "b_ih", "b_hh")},
    )
    f = linear(relu(f), ws[f"{prefix}.ffn_out.weight"], ws[f"{prefix}.ffn_out.bias"])
    return y1 + f


def tf_transformer_block(x: np.ndarray, ws, prefix: str, cfg: ModelConfig) -> np.ndarray:
    """Time transformer then frequency transformer over a (B, C, T, F') map.

    The map is reshaped to B*F' length-T sequences for the time layer,
    then to B*T length-F' sequences for the frequency layer, and back.
    """
    B, C, T, Fp = x.shape
    seq = np.ascontiguousarray(x.transpose(0, 3, 2, 1)).reshape(B * Fp, T, C)
    seq = transformer_layer(seq, ws, f"{prefix}.time", cfg)
    x = seq.reshape(B, Fp, T, C)
    seq = np.ascontiguousarray(x.transpose(0, 2, 1, 3)).reshape(B * T, Fp, C)
    seq = transformer_layer(seq, ws, f"{prefix}.freq", cfg)
    x = seq.reshape(B, T, Fp, C)
    return np.ascontiguousarray(x.transpose(0, 3, 1, 2))


def encoder(y_in: np.ndarray, ws, cfg: ModelConfig) -> np.ndarray:
    """Encode (B, T, F, 2) input features into a (B, C, T, F') map.

    Channel 0 is the compressed magnitude, channel 1 the wrapped phase.
    A 1x3 conv block lifts to C channels, a dilated DenseNet aggregates
    temporal context, and a stride-(1,2) conv block halves F to F'.
    """
    y_in = np.asarray(y_in, dtype=np.float32)
    if y_in.ndim != 4 or y_in.shape[-1] != 2:
        raise ValueError(f"expected (B, T, F, 2) input, got {y_in.shape}")
    if y_in.shape[2] != cfg.n_bins:
        raise ValueError(f"input has {y_in.shape[2]} bins, config expects {cfg.n_bins}")
    x = np.ascontiguousarray(y_in.transpose(0, 3, 1, 2))  # (B, 2, T, F)
    x = _conv_block(x, ws, "encoder.conv_in")
    x = dilated_densenet(x, ws, "encoder.dense", cfg)
    x = _conv_block(x, ws, "encoder.conv_down", stride=(1, 2))
    return x


def _deconv_block(x, ws, prefix, cfg: ModelConfig):
    """Sub-pixel conv doubling F' to 2F', cropped to F, then norm + PReLU."""
    y = conv2d(x, ws[f"{prefix}.conv.weight"], ws[f"{prefix}.conv.bias"], padding=(0, 1))
    y = pixel_shuffle_freq(y, 2)[:, :, :, : cfg.n_bins]
    y = instance_norm(y, ws[f"{prefix}.norm.gamma"], ws[f"{prefix}.norm.beta"])
    return prelu(y, ws[f"{prefix}.act.alpha"])


def mask_decoder(f: np.ndarray, ym_c: np.ndarray, ws, cfg: ModelConfig) -> np.ndarray:
    """Predict a magnitude mask and apply it to the compressed input
    magnitude; returns the enhanced compressed magnitude (B, T, F)."""
    ym_c = np.asarray(ym_c, dtype=np.float32)
    x = dilated_densenet(f, ws, "mask.dense", cfg)
    x = _deconv_block(x, ws, "mask.up", cfg)
    x = conv2d(x, ws["mask.out.conv.weight"], ws["mask.out.conv.bias"], padding=(0, 1))
    x = x[:, 0, :, :]  # (B, T, F)
    if cfg.task_head == "bounded_mask":
        mask = lsigmoid(x, ws["mask.out.lsigmoid.alpha"], beta=cfg.beta)
    else:
        mask = prelu(x, ws["mask.out.act.alpha"])
    return mask * ym_c


def phase_decoder(f: np.ndarray, ws, cfg: ModelConfig) -> np.ndarray:
    """Predict the wrapped phase spectrum (B, T, F) in (-pi, pi].

    Two parallel convs emit pseudo-real and pseudo-imaginary components,
    combined by the two-argument arc-tangent.
    """
    x = dilated_densenet(f, ws, "phase.dense", cfg)
    x = _deconv_block(x, ws, "phase.up", cfg)
    r = conv2d(x, ws["phase.real.weight"], ws["phase.real.bias"], padding=(0, 1))
    i = conv2d(x, ws["phase.imag.weight"], ws["phase.imag.bias"], padding=(0, 1))
    return np.arctan2(i[:, 0, :, :], r[:, 0, :, :])


def enhance_spectra(
    ym_c: np.ndarray, y_p: np.ndarray, ws, cfg: ModelConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Run the network on batched (B, T, F) compressed-magnitude and phase
    grids; returns (enhanced compressed magnitude, enhanced phase)."""
    ym_c = np.asarray(ym_c, dtype=np.float32)
    y_p = np.asarray(y_p, dtype=np.float32)
    if ym_c.shape != y_p.shape:
        raise ValueError(f"shape mismatch: {ym_c.shape} vs {y_p.shape}")
    y_in = np.stack([ym_c, y_p], axis=-1)  # (B, T, F, 2)
    f = encoder(y_in, ws, cfg)
    for i in range(cfg.n_blocks):
        f = tf_transformer_block(f, ws, f"block{i}", cfg)
    xhat_m_c = mask_decoder(f, ym_c, ws, cfg)
    xhat_p = phase_decoder(f, ws, cfg)
    return xhat_m_c, xhat_p


def forward(
    y: Waveform, ws, cfg: ModelConfig, stft_cfg: StftConfig
) -> tuple[Waveform, np.ndarray, np.ndarray]:
    """Enhance one utterance; returns (waveform, magnitude, phase).

    The input is scaled to unit RMS before analysis and the output is
    scaled back, so enhancement is well defined across input levels.
    The output waveform has exactly the input length.
    """
    if stft_cfg.n_bins != cfg.n_bins:
        raise ValueError(
            f"stft config produces {stft_cfg.n_bins} bins, model expects {cfg.n_bins}"
        )
    scale = rms(y)
    x = y.samples / scale if scale > 0 else y.samples
    S = stft(x, stft_cfg)
    y_m, y_p = mag_phase(S)
    ym_c = compress(y_m, stft_cfg.compression)

    xhat_m_c, xhat_p = enhance_spectra(ym_c[None], y_p[None], ws, cfg)
    xhat_m = decompress(np.asarray(xhat_m_c[0], dtype=np.float64), stft_cfg.compression)
    xhat_p = np.asarray(xhat_p[0], dtype=np.float64)

    xhat = istft(xhat_m * np.exp(1j * xhat_p), stft_cfg, out_len=len(y))
    if scale > 0:
        xhat = xhat * scale
    return Waveform(xhat, y.sample_rate), xhat_m, xhat_p
