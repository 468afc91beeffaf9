"""Pre-crime behavior segmentation and dataset plumbing.

A crime video carries two human-marked moments: the frame where the observer
starts doubting the person (CCM) and the frame where the offense is
unquestionable (SCM).  Together with the suspect's first appearance these
split the video into pre-crime / suspicious / evidence segments; only the
pre-crime segment feeds training for crime classes, while normal videos
contribute their full range.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .video import (frames_to_tensor, load_video_frames, read_pcv_header,
                    resize_clip, to_luma)

log = logging.getLogger(__name__)

CLASS_LABELS = ("normal", "shoplifting", "stealing", "arson", "abuse")
CRIME_LABELS = CLASS_LABELS[1:]

CLIP_LENGTH_DEFAULT = 16
TRAIN_STRIDE_DEFAULT = 16
EVAL_STRIDE_DEFAULT = 8


class AnnotationError(ValueError):
    pass


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class PcbAnnotation:
    first_appearance: int
    ccm: int
    scm: int
    annotator: str = ""
    created_at: str = ""

    def validate(self, frame_count: int, video_id: str = "?") -> None:
        f, c, s = self.first_appearance, self.ccm, self.scm
        if not (0 <= f < c <= s < frame_count):
            raise AnnotationError(
                f"{video_id}: need 0 <= first({f}) < ccm({c}) <= scm({s}) "
                f"< frame_count({frame_count})")

    def to_json(self, video_id: str) -> dict:
        return {
            "video_id": video_id,
            "first_appearance": self.first_appearance,
            "ccm": self.ccm,
            "scm": self.scm,
            "annotator": self.annotator,
            "created_at": self.created_at or datetime.now(timezone.utc).isoformat(),
        }


def annotation_from_json(obj: dict) -> PcbAnnotation:
    try:
        return PcbAnnotation(
            first_appearance=int(obj["first_appearance"]),
            ccm=int(obj["ccm"]),
            scm=int(obj["scm"]),
            annotator=str(obj.get("annotator", "")),
            created_at=str(obj.get("created_at", "")),
        )
    except (KeyError, TypeError) as exc:
        raise AnnotationError(f"malformed annotation JSON: {exc}") from exc


def load_annotation(path) -> PcbAnnotation:
    with open(path) as fh:
        return annotation_from_json(json.load(fh))


def save_annotation(path, ann: PcbAnnotation, video_id: str) -> None:
    # atomic: write temp then rename, so a concurrent reader never sees a torn file
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(ann.to_json(video_id), indent=2) + "\n")
    tmp.replace(path)


@dataclass(frozen=True)
class PcbSegments:
    """Half-open frame ranges partitioning [first_appearance, frame_count)."""
    pre_crime: tuple[int, int]
    suspicious: tuple[int, int]
    evidence: tuple[int, int]


def segment_video(frame_count: int, ann: PcbAnnotation, video_id: str = "?") -> PcbSegments:
    ann.validate(frame_count, video_id)
    return PcbSegments(
        pre_crime=(ann.first_appearance, ann.ccm),
        suspicious=(ann.ccm, ann.scm),
        evidence=(ann.scm, frame_count),
    )


def pcb_training_frames(frame_count: int, ann: PcbAnnotation | None,
                        video_id: str = "?") -> tuple[int, int]:
    """Frame range entering training: pre-crime only for crime videos,
    the full video for normal ones (ann is None)."""
    if ann is None:
        return (0, frame_count)
    return segment_video(frame_count, ann, video_id).pre_crime


@dataclass
class Clip:
    tensor: np.ndarray  # [ch, L, 60, 80]
    source_id: str
    label: str


def extract_clips(frames: np.ndarray, frame_range: tuple[int, int],
                  clip_length: int, stride: int,
                  source_id: str = "?", label: str = "normal") -> list[Clip]:
    """Sliding windows of clip_length frames at the given stride over
    frames[:, start:end]. Ranges shorter than a clip yield nothing."""
    if clip_length < 1 or stride < 1:
        raise ValueError("clip_length and stride must be >= 1")
    start, end = frame_range
    n = end - start
    if n < clip_length:
        log.warning("%s: range of %d frames too short for clip length %d, skipped",
                    source_id, n, clip_length)
        return []
    clips = []
    for off in range(start, end - clip_length + 1, stride):
        clips.append(Clip(frames[:, off:off + clip_length].copy(), source_id, label))
    return clips


# ---------------------------------------------------------------------------
# manifest

MANIFEST_VERSION = 1


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    label: str
    annotation: str | None


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry]
    root: Path = field(default_factory=Path)

    @property
    def class_counts(self) -> dict[str, int]:
        counts = {label: 0 for label in CLASS_LABELS}
        for e in self.entries:
            counts[e.label] += 1
        return counts

    def video_path(self, entry: ManifestEntry) -> Path:
        return self.root / entry.path

    def annotation_path(self, entry: ManifestEntry) -> Path | None:
        return self.root / entry.annotation if entry.annotation else None


def load_manifest(path, check_paths: bool = True) -> DatasetManifest:
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}:{exc.lineno}: {exc.msg}") from exc
    if obj.get("version") != MANIFEST_VERSION:
        raise ManifestError(f"{path}: unsupported manifest version {obj.get('version')}")
    entries = []
    problems = []
    for i, raw in enumerate(obj.get("entries", [])):
        label = raw.get("label")
        if label not in CLASS_LABELS:
            problems.append(f"entry {i} ({raw.get('path')}): unknown label {label!r}")
            continue
        entry = ManifestEntry(raw["path"], label, raw.get("annotation"))
        if label in CRIME_LABELS and entry.annotation is None:
            problems.append(f"entry {i} ({entry.path}): crime-class video missing annotation")
            continue
        if check_paths:
            problems.extend(_check_entry(path.parent, entry, i))
        entries.append(entry)
    if problems:
        raise ManifestError(f"{path}: invalid manifest:\n  " + "\n  ".join(problems))
    return DatasetManifest(entries, root=path.parent)


def _check_entry(root: Path, entry: ManifestEntry, idx: int) -> list[str]:
    problems = []
    vpath = root / entry.path
    if not vpath.exists():
        return [f"entry {idx} ({entry.path}): video file missing"]
    if entry.annotation:
        apath = root / entry.annotation
        if not apath.exists():
            return [f"entry {idx} ({entry.path}): annotation file missing"]
        try:
            ann = load_annotation(apath)
            if vpath.is_file():
                frame_count = read_pcv_header(vpath)[0]
                ann.validate(frame_count, entry.path)
        except (AnnotationError, ValueError) as exc:
            problems.append(f"entry {idx} ({entry.path}): {exc}")
    return problems


def save_manifest(manifest: DatasetManifest, path) -> None:
    obj = {
        "version": MANIFEST_VERSION,
        "entries": [{"path": e.path, "label": e.label, "annotation": e.annotation}
                    for e in manifest.entries],
    }
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")


def load_entry_clips(manifest: DatasetManifest, entry: ManifestEntry,
                     clip_length: int = CLIP_LENGTH_DEFAULT,
                     stride: int = TRAIN_STRIDE_DEFAULT) -> list[Clip]:
    """Decode one video, apply the PCB training-range policy, and window it
    into fixed-geometry grayscale clips."""
    frames_u8, _fps = load_video_frames(manifest.video_path(entry))
    frames = resize_clip(frames_to_tensor(to_luma(frames_u8)))
    ann = None
    apath = manifest.annotation_path(entry)
    if apath is not None:
        ann = load_annotation(apath)
    frame_range = pcb_training_frames(frames.shape[1], ann, entry.path)
    return extract_clips(frames, frame_range, clip_length, stride,
                         source_id=entry.path, label=entry.label)
