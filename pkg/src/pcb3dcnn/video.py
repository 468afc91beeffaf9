"""Video frame I/O: the raw ".pcv" container, PNG frame directories,
grayscale conversion, and bilinear resizing to the working resolution.

".pcv" layout (little-endian): magic "PCBV", u8 version=1, u16 width,
u16 height, u8 channels, u32 frame_count, u16 fps_numerator,
u16 fps_denominator, then frame_count frames of height*width*channels
unsigned bytes, row-major.
"""

from __future__ import annotations

import struct
from fractions import Fraction
from pathlib import Path

import numpy as np
from PIL import Image

from .tensor import DTYPE

PCV_MAGIC = b"PCBV"
PCV_VERSION = 1
_PCV_HEADER = struct.Struct("<4sB HH B I HH")

TARGET_H = 60
TARGET_W = 80


class VideoFormatError(ValueError):
    pass


def write_pcv(path, frames: np.ndarray, fps: Fraction = Fraction(30, 1)) -> None:
    """frames: uint8 [T,H,W,C]."""
    if frames.ndim != 4 or frames.dtype != np.uint8:
        raise VideoFormatError("frames must be uint8 [T,H,W,C]")
    t, h, w, c = frames.shape
    header = _PCV_HEADER.pack(PCV_MAGIC, PCV_VERSION, w, h, c, t,
                              fps.numerator, fps.denominator)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(frames).tobytes())


def read_pcv_header(path) -> tuple[int, int, int, int, Fraction]:
    """Returns (frame_count, height, width, channels, fps) without frame data."""
    with open(path, "rb") as fh:
        raw = fh.read(_PCV_HEADER.size)
    if len(raw) < _PCV_HEADER.size:
        raise VideoFormatError(f"{path}: truncated header")
    magic, version, w, h, c, t, fn, fd = _PCV_HEADER.unpack(raw)
    if magic != PCV_MAGIC:
        raise VideoFormatError(f"{path}: bad magic {magic!r}")
    if version != PCV_VERSION:
        raise VideoFormatError(f"{path}: unsupported version {version}")
    if fd == 0:
        raise VideoFormatError(f"{path}: zero fps denominator")
    return t, h, w, c, Fraction(fn, fd)


def read_pcv(path) -> tuple[np.ndarray, Fraction]:
    """Returns (uint8 frames [T,H,W,C], fps)."""
    t, h, w, c, fps = read_pcv_header(path)
    expected = t * h * w * c
    with open(path, "rb") as fh:
        fh.seek(_PCV_HEADER.size)
        data = np.frombuffer(fh.read(), dtype=np.uint8)
    if data.size != expected:
        raise VideoFormatError(f"{path}: expected {expected} frame bytes, got {data.size}")
    return data.reshape(t, h, w, c).copy(), fps


def read_frame_dir(path) -> np.ndarray:
    """Directory of numbered PNG frames -> uint8 [T,H,W,C]."""
    files = sorted(Path(path).glob("*.png"), key=lambda p: int(p.stem))
    if not files:
        raise VideoFormatError(f"{path}: no PNG frames found")
    frames = []
    for f in files:
        arr = np.asarray(Image.open(f))
        if arr.ndim == 2:
            arr = arr[:, :, None]
        frames.append(arr)
    out = np.stack(frames)
    if out.dtype != np.uint8:
        raise VideoFormatError(f"{path}: frames must be 8-bit")
    return out


def load_video_frames(path) -> tuple[np.ndarray, Fraction]:
    """Load a .pcv file or a PNG frame directory."""
    p = Path(path)
    if p.is_dir():
        return read_frame_dir(p), Fraction(30, 1)
    return read_pcv(p)


def to_luma(frames: np.ndarray) -> np.ndarray:
    """uint8 [T,H,W,C] -> uint8 [T,H,W,1] via BT.601 luma (identity if C=1)."""
    if frames.shape[-1] == 1:
        return frames
    if frames.shape[-1] < 3:
        raise VideoFormatError(f"cannot convert {frames.shape[-1]}-channel frames to luma")
    rgb = frames[..., :3].astype(np.float64)
    y = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    return np.clip(np.rint(y), 0, 255).astype(np.uint8)[..., None]


def frames_to_tensor(frames: np.ndarray) -> np.ndarray:
    """uint8 [T,H,W,C] -> float32 [C,T,H,W] scaled to [0,1]."""
    return (frames.astype(DTYPE) / DTYPE(255.0)).transpose(3, 0, 1, 2).copy()


def _axis_coords(n_in: int, n_out: int) -> np.ndarray:
    # align-corners sampling: exact identity when n_in == n_out
    if n_out == 1 or n_in == 1:
        return np.zeros(n_out)
    return np.arange(n_out) * (n_in - 1) / (n_out - 1)


def resize_frame(frame: np.ndarray, out_h: int = TARGET_H, out_w: int = TARGET_W) -> np.ndarray:
    """Bilinear resample [ch,H,W] -> [ch,out_h,out_w]; preserves value bounds."""
    if frame.ndim != 3 or frame.shape[1] < 1 or frame.shape[2] < 1:
        raise VideoFormatError(f"frame must be non-empty [ch,H,W], got {frame.shape}")
    ch, h, w = frame.shape
    if (h, w) == (out_h, out_w):
        return frame.astype(DTYPE, copy=False)
    ys = _axis_coords(h, out_h)
    xs = _axis_coords(w, out_w)
    y0 = np.clip(np.floor(ys).astype(int), 0, h - 1)
    x0 = np.clip(np.floor(xs).astype(int), 0, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0).astype(np.float64)
    fx = (xs - x0).astype(np.float64)
    f = frame.astype(np.float64)
    top = f[:, y0][:, :, x0] * (1 - fx) + f[:, y0][:, :, x1] * fx
    bot = f[:, y1][:, :, x0] * (1 - fx) + f[:, y1][:, :, x1] * fx
    out = top * (1 - fy[None, :, None]) + bot * fy[None, :, None]
    return np.clip(out, f.min(), f.max()).astype(DTYPE)


def resize_clip(frames: np.ndarray, out_h: int = TARGET_H, out_w: int = TARGET_W) -> np.ndarray:
    """float32 [C,T,H,W] -> [C,T,out_h,out_w]."""
    c, t, h, w = frames.shape
    if (h, w) == (out_h, out_w):
        return frames
    out = np.empty((c, t, out_h, out_w), dtype=DTYPE)
    for i in range(t):
        out[:, i] = resize_frame(frames[:, i], out_h, out_w)
    return out
