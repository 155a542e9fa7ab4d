"""Audio feature stub and the causal temporal-compression encoder.

The pretrained speech model is replaced by deterministic per-frame envelope
statistics, which keeps the synthetic corpus fully measurable: the driving
envelope is recoverable from the features.  The causal encoder compresses the
frame-rate feature sequence by 8x with three strided causal convolutions so
that audio steps line up one-to-one with latent video frames.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

FRAME_FEATURES = 4  # mean-abs, envelope delta, rms, sign-change rate


@dataclass
class AudioTrack:
    waveform: torch.Tensor
    sample_rate: float

    def __post_init__(self):
        self.waveform = self.waveform.reshape(-1)
        if self.waveform.numel() < 1:
            raise ValueError("empty waveform")
        if not torch.isfinite(self.waveform).all():
            raise ValueError("waveform contains non-finite values")

    def frame_count(self, fps: float) -> int:
        return int(round(self.waveform.numel() * fps / self.sample_rate))


@dataclass
class AudioFeatures:
    """Global per-frame feature (T~, C) and local tokens (T~, n, C_a)."""

    a_glo: torch.Tensor
    a_loc: torch.Tensor

    @property
    def t_lat(self) -> int:
        return self.a_glo.shape[0]


def extract_frame_features(track: AudioTrack, fps: float, t_frames: int) -> torch.Tensor:
    """(T, 4) deterministic envelope statistics of each frame's sample window."""
    if fps <= 0:
        raise ValueError("fps must be positive")
    wav = track.waveform
    s = wav.numel()
    sr = track.sample_rate
    feats = torch.zeros(t_frames, FRAME_FEATURES)
    prev_env = 0.0
    for t in range(t_frames):
        a = min(int(t * sr / fps), s)
        b = min(int((t + 1) * sr / fps), s)
        win = wav[a:b]
        if win.numel() == 0:
            prev_env = 0.0
            continue
        env = win.abs().mean()
        feats[t, 0] = env
        feats[t, 1] = env - prev_env
        feats[t, 2] = win.pow(2).mean().sqrt()
        if win.numel() > 1:
            signs = torch.sign(win)
            feats[t, 3] = (signs[1:] * signs[:-1] < 0).float().mean()
        prev_env = float(env)
    return feats


class CausalAudioEncoder(nn.Module):
    """Three stacked causal 1D convolutions (kernel 3, stride 2, left pad 2)
    followed by a global head projecting to the backbone width and ``n_local``
    per-frame local heads.

    Each layer maps length L to ceil(L/2), so three layers give ceil(T/8) and
    step j only ever sees input frames <= 8j.
    """

    def __init__(self, c_in: int = FRAME_FEATURES, c_hidden: int = 64, width: int = 512,
                 n_local: int = 4, c_audio: int | None = None):
        super().__init__()
        c_audio = width if c_audio is None else c_audio
        self.n_local = n_local
        self.convs = nn.ModuleList([
            nn.Conv1d(c_in, c_hidden, kernel_size=3, stride=2),
            nn.Conv1d(c_hidden, c_hidden, kernel_size=3, stride=2),
            nn.Conv1d(c_hidden, c_hidden, kernel_size=3, stride=2),
        ])
        self.global_head = nn.Linear(c_hidden, width)
        self.local_heads = nn.ModuleList([nn.Linear(c_hidden, c_audio) for _ in range(n_local)])
        self.padding_token = nn.Parameter(torch.zeros(1, c_audio))
        # global conditioning ramps in from zero, like the adapter gates
        nn.init.zeros_(self.global_head.weight)
        nn.init.zeros_(self.global_head.bias)

    def downsample(self, features: torch.Tensor) -> torch.Tensor:
        """(T, c_in) frame features -> (ceil(T/8), c_hidden) causal hidden states."""
        x = features.T.unsqueeze(0)  # (1, c, T)
        for i, conv in enumerate(self.convs):
            x = conv(F.pad(x, (2, 0)))
            if i < len(self.convs) - 1:
                x = F.silu(x)
        return x[0].T

    def heads(self, hidden: torch.Tensor) -> AudioFeatures:
        a_glo = self.global_head(hidden)
        a_loc = torch.stack([head(hidden) for head in self.local_heads], dim=1)
        return AudioFeatures(a_glo, a_loc)

    def forward(self, features: torch.Tensor) -> AudioFeatures:
        return self.heads(self.downsample(features))


def append_padding_token(a_loc: torch.Tensor, padding: torch.Tensor) -> torch.Tensor:
    """Concatenate the learned padding row onto every frame: (T~, n, C_a) -> (T~, n+1, C_a)."""
    t_lat = a_loc.shape[0]
    pad = padding.reshape(1, 1, -1).expand(t_lat, 1, -1)
    return torch.cat([a_loc, pad.to(a_loc.dtype)], dim=1)


def downsampled_length(t: int) -> int:
    """Temporal length after the three stride-2 causal layers: ceil(T/8)."""
    out = t
    for _ in range(3):
        out = (out + 1) // 2
    return out
