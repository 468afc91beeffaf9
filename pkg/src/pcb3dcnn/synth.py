"""Deterministic synthetic video dataset generator.

Stands in for real surveillance footage at test time: each class renders a
moving-blob motion pattern, crime classes get a bright "event" after the
marked crime moment, and a similarity knob blends the per-class patterns
toward a common one (similarity=1 makes all classes draw from the same
generator, so labels carry no information).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .pcb import (CLASS_LABELS, CRIME_LABELS, DatasetManifest, ManifestEntry,
                  PcbAnnotation, save_annotation, save_manifest)
from .tensor import RngStream
from .video import write_pcv


@dataclass(frozen=True)
class MotionPattern:
    angle: float  # movement direction, radians
    speed: float  # pixels per frame
    radius: float  # blob radius
    intensity: float  # blob peak brightness, 0..255
    wobble: float  # sinusoidal sideways wobble amplitude


CLASS_PATTERNS = {
    "normal": MotionPattern(0.0, 1.6, 6.0, 210.0, 0.0),
    "shoplifting": MotionPattern(math.pi / 2, 1.0, 10.0, 120.0, 2.0),
    "stealing": MotionPattern(math.pi, 2.2, 4.5, 235.0, 1.0),
    "arson": MotionPattern(3 * math.pi / 2, 0.7, 13.0, 160.0, 3.0),
    "abuse": MotionPattern(math.pi / 4, 2.6, 7.5, 90.0, 2.0),
}


def _blend(pattern: MotionPattern, similarity: float) -> MotionPattern:
    if not 0.0 <= similarity <= 1.0:
        raise ValueError("similarity must be in [0,1]")
    vals = np.array([[p.angle, p.speed, p.radius, p.intensity, p.wobble]
                     for p in CLASS_PATTERNS.values()])
    common = vals.mean(axis=0)
    own = np.array([pattern.angle, pattern.speed, pattern.radius,
                    pattern.intensity, pattern.wobble])
    mixed = (1 - similarity) * own + similarity * common
    return MotionPattern(*mixed)


def render_video(pattern: MotionPattern, frames: int, height: int, width: int,
                 rng: RngStream, event_from: int | None = None) -> np.ndarray:
    """uint8 [T,H,W,1]; event_from adds a bright flash from that frame on."""
    gen = rng.generator
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    x = gen.uniform(width * 0.2, width * 0.8)
    y = gen.uniform(height * 0.2, height * 0.8)
    phase = gen.uniform(0, 2 * math.pi)
    speed = pattern.speed * gen.uniform(0.9, 1.1)
    dx, dy = math.cos(pattern.angle) * speed, math.sin(pattern.angle) * speed
    out = np.empty((frames, height, width, 1), dtype=np.uint8)
    for t in range(frames):
        img = gen.uniform(0.0, 24.0, size=(height, width))
        wob = pattern.wobble * math.sin(0.5 * t + phase)
        cx = (x + dx * t - dy / max(speed, 1e-9) * wob) % width
        cy = (y + dy * t + dx / max(speed, 1e-9) * wob) % height
        d2 = (xx - cx) ** 2 + (yy - cy) ** 2
        img += pattern.intensity * np.exp(-d2 / (2 * pattern.radius**2))
        if event_from is not None and t >= event_from:
            grow = min(1.0, 0.2 * (t - event_from + 1))
            r = 10 + 14 * grow
            img[int(height * 0.3):int(height * 0.3 + r), int(width * 0.6):int(width * 0.6 + r)] = 250
        out[t, :, :, 0] = np.clip(img, 0, 255).astype(np.uint8)
    return out


def default_annotation(frames: int, clip_length: int = 16) -> PcbAnnotation:
    """PCB boundaries leaving a pre-crime segment of at least one clip."""
    ccm = max(clip_length, (frames * 2) // 3)
    scm = ccm + max(1, (frames - ccm) // 2)
    if scm >= frames:
        raise ValueError(f"video of {frames} frames too short for clip length {clip_length}")
    return PcbAnnotation(0, ccm, scm, annotator="synth",
                         created_at="1970-01-01T00:00:00+00:00")


def synth_dataset(out_dir, per_class, similarity: float = 0.0, seed: int = 0,
                  frames: int = 48, height: int = 60, width: int = 80,
                  fps: Fraction = Fraction(30, 1), clip_length: int = 16) -> Path:
    """Materialize videos, annotations, and a manifest under out_dir.

    per_class is an int (count for all five classes) or a dict label->count.
    Returns the manifest path.  Same arguments give byte-identical output.
    """
    if isinstance(per_class, int):
        per_class = {label: per_class for label in CLASS_LABELS}
    for label, count in per_class.items():
        if label not in CLASS_LABELS:
            raise ValueError(f"unknown class label {label!r}")
        if count < 1:
            raise ValueError(f"per-class count must be >= 1, got {count} for {label}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    root = RngStream(seed)
    entries = []
    for ci, label in enumerate(CLASS_LABELS):
        count = per_class.get(label, 0)
        pattern = _blend(CLASS_PATTERNS[label], similarity)
        for vi in range(count):
            vid = f"{label}_{vi:04d}"
            ann = default_annotation(frames, clip_length) if label in CRIME_LABELS else None
            video = render_video(pattern, frames, height, width,
                                 root.substream(ci, vi),
                                 event_from=ann.ccm if ann else None)
            vfile = f"{vid}.pcv"
            write_pcv(out_dir / vfile, video, fps)
            afile = None
            if ann is not None:
                afile = f"{vid}.annotation.json"
                save_annotation(out_dir / afile, ann, vid)
            entries.append(ManifestEntry(vfile, label, afile))
    manifest_path = out_dir / "manifest.json"
    save_manifest(DatasetManifest(entries, root=out_dir), manifest_path)
    return manifest_path
