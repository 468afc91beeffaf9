"""Command-line entry point.

Exit codes: 0 success, 1 runtime failure, 2 usage/validation error.
"""

from __future__ import annotations

import json
import logging
from fractions import Fraction
from pathlib import Path

import click

from . import report as report_mod
from . import server as server_mod
from .harness import (Approach, ExperimentConfig, ExperimentError,
                      run_experiment_grid)
from .nn import DEFAULT_FILTER_PAIRS, FilterPair
from .pcb import (AnnotationError, ManifestError, load_annotation,
                  segment_video)
from .synth import synth_dataset
from .video import read_pcv, write_pcv


class ValidationFailure(click.ClickException):
    exit_code = 2


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable debug logging.")
def main(verbose: bool) -> None:
    """Pre-crime behavior segmentation and 3D CNN experiment toolkit."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.option("--per-class", type=int, required=True, help="Videos per class.")
@click.option("--classes", default=None,
              help="Comma-separated class subset (default: all five).")
@click.option("--similarity", type=float, default=0.0, show_default=True,
              help="Inter-class pattern similarity in [0,1].")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--frames", type=int, default=48, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
def synth(per_class, classes, similarity, seed, frames, out_dir) -> None:
    """Generate a deterministic synthetic dataset."""
    if per_class < 1:
        raise click.UsageError("--per-class must be >= 1")
    spec = per_class
    if classes:
        spec = {label.strip(): per_class for label in classes.split(",")}
    try:
        manifest = synth_dataset(out_dir, spec, similarity=similarity,
                                 seed=seed, frames=frames)
    except ValueError as exc:
        raise ValidationFailure(str(exc))
    click.echo(str(manifest))


@main.command()
@click.argument("video", type=click.Path(exists=True))
@click.argument("annotation", type=click.Path(exists=True))
@click.option("--out-dir", type=click.Path(), default=None,
              help="Output directory (default: next to the video).")
def segment(video, annotation, out_dir) -> None:
    """Split an annotated .pcv video into pre-crime / suspicious / evidence."""
    frames, fps = read_pcv(video)
    try:
        ann = load_annotation(annotation)
        segments = segment_video(frames.shape[0], ann, Path(video).name)
    except AnnotationError as exc:
        raise ValidationFailure(str(exc))
    out_dir = Path(out_dir) if out_dir else Path(video).parent
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(video).stem
    for name, (start, end) in (("precrime", segments.pre_crime),
                               ("suspicious", segments.suspicious),
                               ("evidence", segments.evidence)):
        out = out_dir / f"{stem}.{name}.pcv"
        write_pcv(out, frames[start:end], fps)
        click.echo(f"{out}: frames [{start}, {end}) -> {end - start} frames")


def _load_spec(spec_file) -> dict:
    try:
        return json.loads(Path(spec_file).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationFailure(f"cannot read spec file: {exc}")


@main.command()
@click.argument("spec_file", type=click.Path(exists=True))
@click.option("--out", "out_dir", type=click.Path(), default=None,
              help="Results directory (overrides spec field).")
@click.option("--runs", type=int, default=None, help="Runs per cell (overrides spec).")
@click.option("--workers", type=int, default=None, help="Parallel run workers.")
@click.option("--report/--no-report", "do_report", default=True,
              help="Regenerate report tables and figures after the grid.")
def experiment(spec_file, out_dir, runs, workers, do_report) -> None:
    """Execute an approach x filter-pair experiment grid from a JSON spec.

    Spec fields: manifest, out_dir, approaches, pairs, runs, base_seed,
    epochs, ratio, clip_length, train_stride, eval_stride, workers.
    Re-invoking a partially completed experiment resumes it.
    """
    spec = _load_spec(spec_file)
    try:
        approaches = [Approach(a) for a in spec.get(
            "approaches", [a.value for a in Approach])]
        pairs = [FilterPair.parse(p) for p in spec.get(
            "pairs", [f"{a}-{b}" for a, b in DEFAULT_FILTER_PAIRS])]
    except ValueError as exc:
        raise ValidationFailure(f"invalid spec: {exc}")
    if "manifest" not in spec:
        raise ValidationFailure("spec is missing required field 'manifest'")
    resolved_out = out_dir or spec.get("out_dir")
    if not resolved_out:
        raise ValidationFailure("no output directory (spec 'out_dir' or --out)")
    config = ExperimentConfig(
        manifest_path=str(Path(spec_file).parent / spec["manifest"])
        if not Path(spec["manifest"]).is_absolute() else spec["manifest"],
        approaches=approaches,
        pairs=pairs,
        runs=runs if runs is not None else int(spec.get("runs", 30)),
        base_seed=int(spec.get("base_seed", 0)),
        epochs=int(spec.get("epochs", 20)),
        ratio=float(spec.get("ratio", 0.8)),
        clip_length=int(spec.get("clip_length", 16)),
        train_stride=int(spec.get("train_stride", 16)),
        eval_stride=int(spec.get("eval_stride", 8)),
        workers=workers if workers is not None else int(spec.get("workers", 1)),
    )
    if config.runs < 1:
        raise ValidationFailure("runs must be >= 1")
    try:
        results = run_experiment_grid(config, resolved_out)
    except (ManifestError, ValueError) as exc:
        raise ValidationFailure(str(exc))
    except ExperimentError as exc:
        raise click.ClickException(str(exc))
    click.echo(f"{len(results)} cells complete in {resolved_out}")
    if do_report:
        for name in report_mod.generate_report(resolved_out):
            click.echo(f"report: {name}")


@main.command("report")
@click.argument("results_dir", type=click.Path(exists=True))
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.option("--alpha", type=float, default=0.05, show_default=True)
def report_cmd(results_dir, out_dir, alpha) -> None:
    """Regenerate tables, distribution CSVs, and figures from run records."""
    try:
        written = report_mod.generate_report(results_dir, out_dir, alpha)
    except report_mod.ReportError as exc:
        raise ValidationFailure(str(exc))
    for name in written:
        click.echo(name)


@main.command("annotate-serve")
@click.argument("manifest", type=click.Path(exists=True))
@click.option("--port", type=int, default=8008, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--ui", "ui_dir", type=click.Path(exists=True), default=None,
              help="Directory of built UI assets to serve at /.")
def annotate_serve(manifest, port, host, ui_dir) -> None:
    """Serve the annotation REST API and UI until interrupted."""
    if ui_dir is None:
        bundled = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        ui_dir = bundled if bundled.is_dir() else None
    try:
        server_mod.serve(manifest, port, ui_dir, host)
    except ManifestError as exc:
        raise ValidationFailure(str(exc))
    except OSError as exc:
        raise click.ClickException(f"cannot bind {host}:{port}: {exc}")


if __name__ == "__main__":
    main()
