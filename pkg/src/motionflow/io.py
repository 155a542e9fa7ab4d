"""Binary file formats: clips (MFV1), masks (MFM1), audio (MFA1), checkpoints (MFCK).

All formats are little-endian regardless of platform, so artifacts written on
one machine load bit-exactly on another.  Keypoint tracks are plain text.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
import torch

from .codec import VideoClip

MAGIC_VIDEO = b"MFV1"
MAGIC_MASK = b"MFM1"
MAGIC_AUDIO = b"MFA1"
MAGIC_CHECKPOINT = b"MFCK"
CHECKPOINT_VERSION = 1

_DTYPES = {0: np.float32, 1: np.float64, 2: np.int64}
_DTYPE_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1, np.dtype(np.int64): 2}


def _to_le(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr).astype(arr.dtype.newbyteorder("<"), copy=False).tobytes()


def write_clip(path, clip: VideoClip) -> None:
    t, h, w, c = clip.pixels.shape
    px = clip.pixels.detach().cpu().numpy().astype(np.float32)
    with open(path, "wb") as f:
        f.write(MAGIC_VIDEO)
        f.write(struct.pack("<IIIIf", t, h, w, c, float(clip.fps)))
        f.write(_to_le(px))


def read_clip(path) -> VideoClip:
    with open(path, "rb") as f:
        if f.read(4) != MAGIC_VIDEO:
            raise ValueError(f"{path}: not a clip file (bad magic)")
        t, h, w, c, fps = struct.unpack("<IIIIf", f.read(20))
        data = np.frombuffer(f.read(t * h * w * c * 4), dtype="<f4").reshape(t, h, w, c)
    return VideoClip(torch.from_numpy(data.copy()), fps)


def write_mask(path, mask: torch.Tensor, fps: float = 25.0) -> None:
    """(T, H, W) mask with values in {0, 1}."""
    m = mask.detach().cpu().numpy().astype(np.float32)
    if not np.isin(m, (0.0, 1.0)).all():
        raise ValueError("mask values must be 0 or 1")
    t, h, w = m.shape
    with open(path, "wb") as f:
        f.write(MAGIC_MASK)
        f.write(struct.pack("<IIIIf", t, h, w, 1, float(fps)))
        f.write(_to_le(m))


def read_mask(path) -> torch.Tensor:
    with open(path, "rb") as f:
        if f.read(4) != MAGIC_MASK:
            raise ValueError(f"{path}: not a mask file (bad magic)")
        t, h, w, c, _fps = struct.unpack("<IIIIf", f.read(20))
        if c != 1:
            raise ValueError(f"{path}: mask files are single-channel, got c={c}")
        data = np.frombuffer(f.read(t * h * w * 4), dtype="<f4").reshape(t, h, w)
    return torch.from_numpy(data.copy())


def write_audio(path, waveform: torch.Tensor, sample_rate: float) -> None:
    wav = waveform.detach().cpu().numpy().astype(np.float32).ravel()
    with open(path, "wb") as f:
        f.write(MAGIC_AUDIO)
        f.write(struct.pack("<If", wav.size, float(sample_rate)))
        f.write(_to_le(wav))


def read_audio(path) -> tuple[torch.Tensor, float]:
    with open(path, "rb") as f:
        if f.read(4) != MAGIC_AUDIO:
            raise ValueError(f"{path}: not an audio file (bad magic)")
        s, sr = struct.unpack("<If", f.read(8))
        data = np.frombuffer(f.read(s * 4), dtype="<f4")
    return torch.from_numpy(data.copy()), sr


def write_keypoints(path, frames: list[list[tuple[float, float, float]]]) -> None:
    """One line per frame: `frame_idx x y conf [x y conf ...]`."""
    lines = []
    for i, pts in enumerate(frames):
        cells = [str(i)] + [f"{v:.6g}" for p in pts for v in p]
        lines.append(" ".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def read_keypoints(path) -> list[list[tuple[float, float, float]]]:
    frames = []
    for line in Path(path).read_text().splitlines():
        cells = line.split()
        if not cells:
            continue
        idx = int(cells[0])
        vals = [float(v) for v in cells[1:]]
        if len(vals) % 3 != 0:
            raise ValueError(f"{path}: keypoint line for frame {idx} is not x y conf triples")
        if idx != len(frames):
            raise ValueError(f"{path}: frame indices must be consecutive from 0, got {idx}")
        frames.append([(vals[k], vals[k + 1], vals[k + 2]) for k in range(0, len(vals), 3)])
    return frames


def save_checkpoint(path, tensors: dict[str, torch.Tensor], config_hash: bytes, step: int) -> None:
    """Versioned little-endian checkpoint with name-length-prefixed tensor records."""
    if len(config_hash) != 32:
        raise ValueError("config_hash must be 32 bytes (sha256)")
    with open(path, "wb") as f:
        f.write(MAGIC_CHECKPOINT)
        f.write(struct.pack("<I", CHECKPOINT_VERSION))
        f.write(config_hash)
        f.write(struct.pack("<QI", step, len(tensors)))
        for name in sorted(tensors):
            arr = tensors[name].detach().cpu().numpy()
            if arr.dtype not in _DTYPE_CODES:
                raise ValueError(f"unsupported checkpoint dtype {arr.dtype} for {name}")
            enc = name.encode("utf-8")
            f.write(struct.pack("<H", len(enc)))
            f.write(enc)
            f.write(struct.pack("<BB", _DTYPE_CODES[arr.dtype], arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(_to_le(arr))


def load_checkpoint(path, expected_hash: bytes | None = None) -> tuple[dict[str, torch.Tensor], bytes, int]:
    with open(path, "rb") as f:
        if f.read(4) != MAGIC_CHECKPOINT:
            raise ValueError(f"{path}: not a checkpoint file (bad magic)")
        (version,) = struct.unpack("<I", f.read(4))
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        config_hash = f.read(32)
        if expected_hash is not None and config_hash != expected_hash:
            raise ValueError(
                f"{path}: checkpoint was written under a different config "
                f"(hash {config_hash.hex()[:12]}... != {expected_hash.hex()[:12]}...)"
            )
        step, count = struct.unpack("<QI", f.read(12))
        tensors = {}
        for _ in range(count):
            (nlen,) = struct.unpack("<H", f.read(2))
            name = f.read(nlen).decode("utf-8")
            code, ndim = struct.unpack("<BB", f.read(2))
            shape = struct.unpack(f"<{ndim}I", f.read(4 * ndim))
            dtype = np.dtype(_DTYPES[code]).newbyteorder("<")
            n = int(np.prod(shape)) if ndim else 1
            data = np.frombuffer(f.read(n * dtype.itemsize), dtype=dtype).reshape(shape)
            tensors[name] = torch.from_numpy(data.astype(_DTYPES[code]).copy())
    return tensors, config_hash, step
