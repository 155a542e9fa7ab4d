"""Exactly invertible causal spatiotemporal patch codec.

Video clips are grouped causally in time (frame 0 alone, then fixed blocks of
``r_t`` frames) and patchified spatially into ``p_h x p_w`` blocks.  Each block
of ``r_t * p_h * p_w * c_px`` pixel values maps through an orthogonal channel
projection into a latent vector, so encode/decode round-trips are exact up to
float rounding.  This stands in for a learned video VAE while keeping every
downstream test checkable against ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch

ROLE_NOISY = 0
ROLE_REFERENCE = 1
ROLE_MOTION_ANCHOR = 2
ROLE_NAMES = ("noisy", "reference", "motion-anchor")


def orthogonal_projection(dim: int, seed: int) -> torch.Tensor:
    """Seeded square orthogonal matrix (QR of a Gaussian), float64."""
    gen = torch.Generator().manual_seed(seed)
    a = torch.randn(dim, dim, generator=gen, dtype=torch.float64)
    q, r = torch.linalg.qr(a)
    # fix signs so the factorization is unique
    q = q * torch.sign(torch.diagonal(r))
    return q


@dataclass
class CodecConfig:
    """Block sizes and channel map of the patch codec.

    ``projection`` is either None (identity, lossless by construction) or a
    square orthogonal matrix of shape (block_dim, block_dim).
    """

    r_t: int = 8
    p_h: int = 8
    p_w: int = 8
    c_px: int = 1
    projection: torch.Tensor | None = field(default=None, repr=False)

    def __post_init__(self):
        if min(self.r_t, self.p_h, self.p_w, self.c_px) < 1:
            raise ValueError("codec block sizes must be >= 1")
        if self.projection is not None:
            p = self.projection
            if p.shape != (self.block_dim, self.block_dim):
                raise ValueError(
                    f"projection must be square {self.block_dim}x{self.block_dim}, got {tuple(p.shape)}"
                )
            eye = torch.eye(p.shape[0], dtype=p.dtype)
            if (p.T @ p - eye).abs().max().item() > 1e-6:
                raise ValueError("projection is not orthonormal (P^T P != I within 1e-6)")

    @property
    def block_dim(self) -> int:
        return self.r_t * self.p_h * self.p_w * self.c_px

    @property
    def channels(self) -> int:
        # latent channels; equal to block_dim because the projection is square
        return self.block_dim

    def latent_frames(self, t: int) -> int:
        return 1 + (t - 1 + self.r_t - 1) // self.r_t


# LTX-scale preset: kept for compression/cost arithmetic
LTX_CODEC = dict(r_t=8, p_h=32, p_w=32)


@dataclass
class VideoClip:
    """Dense pixel tensor (T, H, W, c_px), values in [0, 1], plus frame rate."""

    pixels: torch.Tensor
    fps: float = 25.0

    def __post_init__(self):
        if self.pixels.ndim != 4:
            raise ValueError(f"pixels must be (T,H,W,C), got {tuple(self.pixels.shape)}")
        if self.pixels.shape[0] < 1:
            raise ValueError("clip needs at least one frame")
        if not torch.isfinite(self.pixels).all():
            raise ValueError("clip contains non-finite values")

    @property
    def dims(self) -> tuple[int, int, int]:
        t, h, w, _ = self.pixels.shape
        return t, h, w


@dataclass
class LatentGrid:
    """Compressed representation (T~, H~, W~, C) with the source pixel dims."""

    values: torch.Tensor
    source_dims: tuple[int, int, int]

    @property
    def grid(self) -> tuple[int, int, int]:
        t, h, w, _ = self.values.shape
        return t, h, w

    @property
    def channels(self) -> int:
        return self.values.shape[3]


@dataclass
class TokenSeq:
    """Flattened latent tokens with integer (t, h, w) rotary coordinates.

    Flattening is row-major over (t, h, w); roles use the ROLE_* codes.
    """

    tokens: torch.Tensor  # (N, C)
    coords: torch.Tensor  # (N, 3) int64
    roles: torch.Tensor  # (N,) int64

    def __post_init__(self):
        n = self.tokens.shape[0]
        if self.coords.shape != (n, 3) or self.roles.shape != (n,):
            raise ValueError("tokens, coords and roles disagree on length")


def _check_spatial(h: int, w: int, cfg: CodecConfig) -> None:
    if h % cfg.p_h != 0 or w % cfg.p_w != 0:
        raise ValueError(f"spatial dims {h}x{w} not divisible by patch {cfg.p_h}x{cfg.p_w}")


def pad_causal(video: VideoClip, cfg: CodecConfig) -> VideoClip:
    """Repeat the final frame until T satisfies T == 1 (mod r_t)."""
    t = video.pixels.shape[0]
    rem = (t - 1) % cfg.r_t
    if rem == 0:
        return video
    extra = cfg.r_t - rem
    tail = video.pixels[-1:].expand(extra, -1, -1, -1)
    return VideoClip(torch.cat([video.pixels, tail], dim=0), video.fps)


def _group_causal(frames: torch.Tensor, r_t: int) -> torch.Tensor:
    """(T, ...) -> (T~, r_t, ...) with frame 0 replicated r_t times."""
    t = frames.shape[0]
    if (t - 1) % r_t != 0:
        raise ValueError(f"T={t} does not satisfy T == 1 (mod {r_t}); pad_causal first")
    head = frames[0:1].expand(r_t, *frames.shape[1:]).unsqueeze(0)
    if t == 1:
        return head
    rest = frames[1:].reshape(-1, r_t, *frames.shape[1:])
    return torch.cat([head, rest], dim=0)


def encode(video: VideoClip, cfg: CodecConfig) -> LatentGrid:
    """Patchify a clip into the latent grid (T~, H~, W~, C)."""
    t, h, w = video.dims
    _check_spatial(h, w, cfg)
    g = _group_causal(video.pixels, cfg.r_t)  # (T~, r_t, H, W, c)
    tt = g.shape[0]
    hh, ww = h // cfg.p_h, w // cfg.p_w
    g = g.reshape(tt, cfg.r_t, hh, cfg.p_h, ww, cfg.p_w, cfg.c_px)
    g = g.permute(0, 2, 4, 1, 3, 5, 6).reshape(tt, hh, ww, cfg.block_dim)
    if cfg.projection is not None:
        g = g @ cfg.projection.to(g.dtype)
    return LatentGrid(g.contiguous(), (t, h, w))


def decode(latent: LatentGrid, cfg: CodecConfig) -> VideoClip:
    """Invert encode(); the replicated slots of latent frame 0 are averaged."""
    t, h, w = latent.source_dims
    tt, hh, ww = latent.grid
    if tt != cfg.latent_frames(t) or hh != h // cfg.p_h or ww != w // cfg.p_w:
        raise ValueError(
            f"latent grid {latent.grid} does not match source dims {latent.source_dims}"
        )
    g = latent.values
    if cfg.projection is not None:
        g = g @ cfg.projection.to(g.dtype).T
    g = g.reshape(tt, hh, ww, cfg.r_t, cfg.p_h, cfg.p_w, cfg.c_px)
    g = g.permute(0, 3, 1, 4, 2, 5, 6).reshape(tt, cfg.r_t, h, w, cfg.c_px)
    first = g[0].mean(dim=0, keepdim=True)
    frames = [first] if t == 1 else [first, g[1:].reshape((tt - 1) * cfg.r_t, h, w, cfg.c_px)]
    return VideoClip(torch.cat(frames, dim=0))


def tokenize(latent: LatentGrid, role: int, t_offset: int = 0) -> TokenSeq:
    """Flatten a latent grid row-major over (t, h, w), offsetting temporal coords."""
    if t_offset < 0:
        raise ValueError("t_offset must be >= 0")
    if role not in (ROLE_NOISY, ROLE_REFERENCE, ROLE_MOTION_ANCHOR):
        raise ValueError(f"unknown token role {role}")
    tt, hh, ww = latent.grid
    c = latent.channels
    tokens = latent.values.reshape(tt * hh * ww, c)
    ts = torch.arange(tt).view(tt, 1, 1).expand(tt, hh, ww)
    hs = torch.arange(hh).view(1, hh, 1).expand(tt, hh, ww)
    ws = torch.arange(ww).view(1, 1, ww).expand(tt, hh, ww)
    coords = torch.stack([ts + t_offset, hs, ws], dim=-1).reshape(-1, 3).long()
    roles = torch.full((tt * hh * ww,), role, dtype=torch.int64)
    return TokenSeq(tokens, coords, roles)


def grid_from_tokens(tokens: torch.Tensor, grid: tuple[int, int, int], source_dims) -> LatentGrid:
    """Reassemble (N, C) token values into a LatentGrid (inverse of tokenize order)."""
    tt, hh, ww = grid
    return LatentGrid(tokens.reshape(tt, hh, ww, -1), tuple(source_dims))


def downsample_mask(mask: torch.Tensor, cfg: CodecConfig) -> torch.Tensor:
    """(T, H, W) binary mask -> (T~, H~, W~); each cell is the max over its block."""
    if mask.ndim != 4:
        mask = mask.unsqueeze(-1)
    t, h, w, _ = mask.shape
    _check_spatial(h, w, cfg)
    g = _group_causal(mask, cfg.r_t)
    tt = g.shape[0]
    hh, ww = h // cfg.p_h, w // cfg.p_w
    g = g.reshape(tt, cfg.r_t, hh, cfg.p_h, ww, cfg.p_w, -1)
    return g.amax(dim=(1, 3, 5))[..., 0]


@dataclass
class CompressionStats:
    t_lat: int
    h_lat: int
    w_lat: int
    tokens: int
    pixels_per_token_block: int
    effective_ratio: float


def compression_stats(t: int, h: int, w: int, cfg: CodecConfig) -> CompressionStats:
    """Token-count and compression arithmetic for a clip of the given pixel dims."""
    _check_spatial(h, w, cfg)
    tl = cfg.latent_frames(t)
    hl, wl = h // cfg.p_h, w // cfg.p_w
    tokens = tl * hl * wl
    return CompressionStats(
        t_lat=tl,
        h_lat=hl,
        w_lat=wl,
        tokens=tokens,
        pixels_per_token_block=cfg.r_t * cfg.p_h * cfg.p_w,
        effective_ratio=t * h * w / tokens,
    )
