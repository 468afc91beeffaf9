"""Experiment machinery: training/classification approaches, balanced
accuracy, the binary-from-multiclass collapse, and the seeded 30-run
protocol with resumable persistence.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from . import checkpoint
from .nn import (AdamState, FilterPair, Geometry, Network, adam_step,
                 forward_cached, backward, init_network, softmax_cross_entropy)
from .pcb import (CLASS_LABELS, CLIP_LENGTH_DEFAULT, EVAL_STRIDE_DEFAULT,
                  TRAIN_STRIDE_DEFAULT, DatasetManifest, ManifestEntry,
                  load_entry_clips, load_manifest)
from .tensor import RngStream

log = logging.getLogger(__name__)

CLASS_INDEX = {label: i for i, label in enumerate(CLASS_LABELS)}

BATCH_SIZE = 8
EPOCHS_DEFAULT = 20
SPLIT_RATIO_DEFAULT = 0.8
RUNS_DEFAULT = 30


class Approach(str, Enum):
    BINARY_BINARY = "binary-binary"  # binary training, binary classification
    MULTI_MULTI = "multi-multi"  # multi-class training and classification
    MULTI_BINARY = "multi-binary"  # multi-class training, collapsed to binary

    @property
    def train_mode(self) -> str:
        return "binary" if self is Approach.BINARY_BINARY else "multi"


class LabelScheme(str, Enum):
    BINARY = "binary"  # normal=0, any crime=1
    MULTI = "multi"  # five classes, manifest order

    @property
    def num_classes(self) -> int:
        return 2 if self is LabelScheme.BINARY else 5


def relabel(label: str, scheme: LabelScheme) -> int:
    if label not in CLASS_INDEX:
        raise ValueError(f"unknown source label {label!r}")
    if scheme is LabelScheme.BINARY:
        return 0 if label == "normal" else 1
    return CLASS_INDEX[label]


class SplitError(ValueError):
    pass


def split_dataset(manifest: DatasetManifest, ratio: float,
                  seed: int) -> tuple[list[ManifestEntry], list[ManifestEntry]]:
    """Video-level split, stratified by the five-class label, so no video
    contributes clips to both sides."""
    if not 0.0 < ratio < 1.0:
        raise SplitError(f"ratio must be in (0,1), got {ratio}")
    by_class: dict[str, list[ManifestEntry]] = {}
    for e in manifest.entries:
        by_class.setdefault(e.label, []).append(e)
    rng = RngStream(seed)
    train, test = [], []
    for ci, label in enumerate(CLASS_LABELS):
        entries = by_class.get(label)
        if entries is None:
            continue
        if len(entries) < 2:
            raise SplitError(f"class {label!r} has {len(entries)} video(s); need >= 2")
        order = sorted(entries, key=lambda e: e.path)
        rng.substream(ci).shuffle(order)
        n_test = min(len(order) - 1, max(1, round(len(order) * (1 - ratio))))
        test.extend(order[:n_test])
        train.extend(order[n_test:])
    return train, test


# ---------------------------------------------------------------------------
# metrics


class UndefinedMetricError(ValueError):
    pass


@dataclass
class ConfusionMatrix:
    """counts[true][predicted]; binary order is (normal, suspicious)."""
    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 2 or self.counts.shape[0] != self.counts.shape[1]:
            raise ValueError(f"confusion matrix must be square, got {self.counts.shape}")
        if (self.counts < 0).any():
            raise ValueError("confusion matrix entries must be non-negative")

    @property
    def k(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_lists(self) -> list[list[int]]:
        return self.counts.tolist()


def balanced_accuracy(cm: ConfusionMatrix) -> float:
    """(TPR + TNR) / 2 on a binary matrix; class 1 is the positive class."""
    if cm.k != 2:
        raise ValueError(f"balanced_accuracy needs a 2x2 matrix, got k={cm.k}")
    tn, fp = int(cm.counts[0, 0]), int(cm.counts[0, 1])
    fn, tp = int(cm.counts[1, 0]), int(cm.counts[1, 1])
    if tp + fn == 0 or tn + fp == 0:
        raise UndefinedMetricError("a class has zero ground-truth samples")
    return (tp / (tp + fn) + tn / (tn + fp)) / 2


def multiclass_balanced_accuracy(cm: ConfusionMatrix) -> float:
    """Mean per-class recall (reduces to balanced_accuracy at k=2)."""
    rows = cm.counts.sum(axis=1)
    if (rows == 0).any():
        raise UndefinedMetricError("a class has zero ground-truth samples")
    return float(np.mean(np.diag(cm.counts) / rows))


def collapse_to_binary(cm5: ConfusionMatrix) -> ConfusionMatrix:
    """Five-class matrix (normal first) to binary: any crime-class prediction
    of a crime-class sample counts as a suspicious-behavior detection."""
    if cm5.k != 5:
        raise ValueError(f"collapse needs a 5x5 matrix, got k={cm5.k}")
    c = cm5.counts
    tn = int(c[0, 0])
    fp = int(c[0, 1:].sum())
    fn = int(c[1:, 0].sum())
    tp = int(c[1:, 1:].sum())
    return ConfusionMatrix(np.array([[tn, fp], [fn, tp]], dtype=np.int64))


# ---------------------------------------------------------------------------
# training and evaluation


class DivergenceError(RuntimeError):
    pass


LabeledClip = tuple[np.ndarray, int]


def load_clipset(manifest: DatasetManifest, entries: list[ManifestEntry],
                 clip_length: int, stride: int) -> list[LabeledClip]:
    """Clips as (tensor, five-class index), in manifest entry order."""
    out = []
    for entry in entries:
        for clip in load_entry_clips(manifest, entry, clip_length, stride):
            out.append((clip.tensor, CLASS_INDEX[clip.label]))
    return out


def _scheme_labels(clips: list[LabeledClip], scheme: LabelScheme) -> list[int]:
    return [relabel(CLASS_LABELS[y5], scheme) for _, y5 in clips]


def train_model(clips: list[LabeledClip], scheme: LabelScheme, pair: FilterPair,
                seed: int, epochs: int, geometry: Geometry,
                batch_size: int = BATCH_SIZE) -> tuple[Network, list[float]]:
    """Train the two-conv network on labeled clips; returns (net, per-epoch
    mean loss).  Fully deterministic for a given seed."""
    labels = _scheme_labels(clips, scheme)
    present = set(labels)
    for k in range(scheme.num_classes):
        if k not in present:
            raise ValueError(f"training set has no clips for class {k} "
                             f"under scheme {scheme.value}")
    rng = RngStream(seed)
    net = init_network(pair, scheme.num_classes, geometry, rng.substream(0))
    state = AdamState()
    params = net.parameters()
    trace: list[float] = []
    order = list(range(len(clips)))
    for epoch in range(epochs):
        rng.substream(1, epoch).shuffle(order)
        epoch_loss = 0.0
        for start in range(0, len(order), batch_size):
            batch = order[start:start + batch_size]
            acc: dict[str, np.ndarray] = {}
            for i in batch:
                x, _ = clips[i]
                logits, cache = forward_cached(net, x)
                loss, gl = softmax_cross_entropy(logits, labels[i])
                if not np.isfinite(loss):
                    raise DivergenceError(f"non-finite loss at epoch {epoch}, clip {i}")
                epoch_loss += loss
                for name, g in backward(net, cache, gl).items():
                    if name in acc:
                        acc[name] += g
                    else:
                        acc[name] = g
            inv = 1.0 / len(batch)
            for name in acc:
                acc[name] *= inv
            adam_step(params, acc, state)
        trace.append(epoch_loss / max(1, len(order)))
    return net, trace


def evaluate(net: Network, clips: list[LabeledClip],
             scheme: LabelScheme) -> ConfusionMatrix:
    """Argmax classification of every clip (ties to the lowest class index)."""
    k = scheme.num_classes
    if net.num_classes != k:
        raise ValueError(f"network has {net.num_classes} classes, scheme needs {k}")
    counts = np.zeros((k, k), dtype=np.int64)
    labels = _scheme_labels(clips, scheme)
    for (x, _), y in zip(clips, labels):
        logits, _ = forward_cached(net, x)
        pred = int(np.argmax(logits))  # np.argmax returns the first maximum
        counts[y, pred] += 1
    return ConfusionMatrix(counts)


# ---------------------------------------------------------------------------
# the 30-run protocol


@dataclass
class RunRecord:
    approach: str
    pair: str
    run_index: int
    seed: int
    confusion: list[list[int]]
    bacc: float | None
    loss_trace: list[float]
    elapsed_s: float
    failed: bool = False
    error: str = ""

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "RunRecord":
        return cls(**json.loads(line))


@dataclass
class ExperimentResult:
    approach: str
    pair: str
    runs: list[RunRecord] = field(default_factory=list)

    @property
    def baccs(self) -> list[float]:
        return [r.bacc for r in self.runs if not r.failed]

    @property
    def mean(self) -> float:
        return float(np.mean(self.baccs))

    @property
    def std(self) -> float:
        return float(np.std(self.baccs, ddof=1)) if len(self.baccs) > 1 else 0.0

    @property
    def best(self) -> float:
        return float(max(self.baccs))


@dataclass
class ExperimentConfig:
    manifest_path: str
    approaches: list[Approach]
    pairs: list[FilterPair]
    runs: int = RUNS_DEFAULT
    base_seed: int = 0
    epochs: int = EPOCHS_DEFAULT
    ratio: float = SPLIT_RATIO_DEFAULT
    clip_length: int = CLIP_LENGTH_DEFAULT
    train_stride: int = TRAIN_STRIDE_DEFAULT
    eval_stride: int = EVAL_STRIDE_DEFAULT
    channels: int = 1
    workers: int = 1
    max_failures: int = 3


def default_geometry(clip_length: int = CLIP_LENGTH_DEFAULT,
                     channels: int = 1) -> Geometry:
    return Geometry(channels, clip_length, 60, 80)


def execute_training_run(manifest_path: str, train_mode: str, pair: FilterPair,
                         run_index: int, seed: int, epochs: int, ratio: float,
                         clip_length: int, train_stride: int, eval_stride: int,
                         checkpoint_dir: str | None = None) -> list[RunRecord]:
    """One seeded split-train-evaluate run.  A binary training produces one
    record; a multi-class training produces both the multi-class record and
    its binary collapse (one trained network, two classification approaches)."""
    t0 = time.monotonic()
    manifest = load_manifest(manifest_path)
    train_entries, test_entries = split_dataset(manifest, ratio, seed)
    train_clips = load_clipset(manifest, train_entries, clip_length, train_stride)
    test_clips = load_clipset(manifest, test_entries, clip_length, eval_stride)
    geometry = default_geometry(clip_length)
    scheme = LabelScheme.BINARY if train_mode == "binary" else LabelScheme.MULTI
    net, trace = train_model(train_clips, scheme, pair, seed, epochs, geometry)
    if checkpoint_dir:
        cdir = Path(checkpoint_dir)
        cdir.mkdir(parents=True, exist_ok=True)
        checkpoint.save_network(net, cdir / f"{train_mode}_{pair}_run{run_index:03d}.pcbn")
    cm = evaluate(net, test_clips, scheme)
    elapsed = time.monotonic() - t0
    records = []
    if train_mode == "binary":
        records.append(RunRecord(Approach.BINARY_BINARY.value, str(pair), run_index,
                                 seed, cm.to_lists(), balanced_accuracy(cm),
                                 trace, elapsed))
    else:
        records.append(RunRecord(Approach.MULTI_MULTI.value, str(pair), run_index,
                                 seed, cm.to_lists(), multiclass_balanced_accuracy(cm),
                                 trace, elapsed))
        cm2 = collapse_to_binary(cm)
        records.append(RunRecord(Approach.MULTI_BINARY.value, str(pair), run_index,
                                 seed, cm2.to_lists(), balanced_accuracy(cm2),
                                 trace, elapsed))
    return records


def _run_task(args) -> list[RunRecord]:
    (manifest_path, train_mode, pair_text, run_index, base_seed, epochs,
     ratio, clip_length, train_stride, eval_stride) = args
    pair = FilterPair.parse(pair_text)
    seed = base_seed + run_index
    try:
        return execute_training_run(manifest_path, train_mode, pair, run_index,
                                    seed, epochs, ratio, clip_length,
                                    train_stride, eval_stride)
    except DivergenceError as exc:
        # one retry with a perturbed seed, then the run is marked failed
        log.warning("run %s/%s #%d diverged (%s); retrying", train_mode, pair, run_index, exc)
        try:
            return execute_training_run(manifest_path, train_mode, pair, run_index,
                                        seed + 1_000_003, epochs, ratio, clip_length,
                                        train_stride, eval_stride)
        except DivergenceError as exc2:
            approaches = ([Approach.BINARY_BINARY] if train_mode == "binary"
                          else [Approach.MULTI_MULTI, Approach.MULTI_BINARY])
            return [RunRecord(a.value, pair_text, run_index, seed, [], None, [],
                              0.0, failed=True, error=str(exc2)) for a in approaches]


def _records_file(out_dir: Path, train_mode: str, pair: FilterPair) -> Path:
    return out_dir / f"runs_{train_mode}_{pair}.jsonl"


def _load_records(path: Path) -> dict[int, list[RunRecord]]:
    by_run: dict[int, list[RunRecord]] = {}
    if path.exists():
        for line in path.read_text().splitlines():
            if line.strip():
                rec = RunRecord.from_json(line)
                by_run.setdefault(rec.run_index, []).append(rec)
    return by_run


class ExperimentError(RuntimeError):
    pass


def run_experiment_grid(config: ExperimentConfig, out_dir) -> dict[tuple[str, str], ExperimentResult]:
    """Run the full approach x filter-pair grid, persisting each run as a
    JSONL line so an interrupted experiment resumes at the next run index."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train_modes = sorted({a.train_mode for a in config.approaches})
    tasks = []
    existing: dict[tuple[str, str], dict[int, list[RunRecord]]] = {}
    for pair in config.pairs:
        for mode in train_modes:
            done = _load_records(_records_file(out_dir, mode, pair))
            existing[(mode, str(pair))] = done
            for run_index in range(config.runs):
                if run_index not in done:
                    tasks.append((config.manifest_path, mode, str(pair), run_index,
                                  config.base_seed, config.epochs, config.ratio,
                                  config.clip_length, config.train_stride,
                                  config.eval_stride))
    log.info("experiment grid: %d tasks to run (%d already persisted)",
             len(tasks), sum(len(v) for v in existing.values()))

    def persist(task, records):
        mode, pair_text, run_index = task[1], task[2], task[3]
        with open(_records_file(out_dir, mode, FilterPair.parse(pair_text)), "a") as fh:
            for rec in records:
                fh.write(rec.to_json() + "\n")
        existing[(mode, pair_text)][run_index] = records

    if config.workers > 1 and tasks:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            for task, records in zip(tasks, pool.map(_run_task, tasks)):
                persist(task, records)
    else:
        for task in tasks:
            persist(task, _run_task(task))

    results: dict[tuple[str, str], ExperimentResult] = {}
    for pair in config.pairs:
        for approach in config.approaches:
            key = (approach.value, str(pair))
            res = ExperimentResult(approach.value, str(pair))
            by_run = existing[(approach.train_mode, str(pair))]
            for run_index in sorted(by_run):
                for rec in by_run[run_index]:
                    if rec.approach == approach.value:
                        res.runs.append(rec)
            failures = sum(1 for r in res.runs if r.failed)
            if failures > config.max_failures:
                raise ExperimentError(
                    f"{approach.value}/{pair}: {failures} failed runs exceeds "
                    f"limit {config.max_failures}")
            results[key] = res
    _write_summary(out_dir, config, results)
    return results


def _write_summary(out_dir: Path, config: ExperimentConfig,
                   results: dict[tuple[str, str], ExperimentResult]) -> None:
    summary = {
        "config": {
            "manifest": config.manifest_path,
            "approaches": [a.value for a in config.approaches],
            "pairs": [str(p) for p in config.pairs],
            "runs": config.runs,
            "base_seed": config.base_seed,
            "epochs": config.epochs,
            "ratio": config.ratio,
        },
        "cells": [
            {"approach": r.approach, "pair": r.pair, "runs": len(r.runs),
             "failed": sum(1 for x in r.runs if x.failed),
             "mean_bacc": r.mean, "std_bacc": r.std, "best_bacc": r.best}
            for r in results.values()
        ],
    }
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")


def load_experiment_results(out_dir) -> dict[tuple[str, str], ExperimentResult]:
    """Rebuild per-cell results from persisted JSONL files."""
    out_dir = Path(out_dir)
    results: dict[tuple[str, str], ExperimentResult] = {}
    for path in sorted(out_dir.glob("runs_*.jsonl")):
        for line in path.read_text().splitlines():
            if not line.strip():
                continue
            rec = RunRecord.from_json(line)
            key = (rec.approach, rec.pair)
            results.setdefault(key, ExperimentResult(rec.approach, rec.pair)).runs.append(rec)
    for res in results.values():
        res.runs.sort(key=lambda r: r.run_index)
    return results
