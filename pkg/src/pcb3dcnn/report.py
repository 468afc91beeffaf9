"""Report generation: comparison/best tables as CSV and aligned text,
per-configuration bACC distributions, and box-plot figures."""

from __future__ import annotations

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .harness import Approach, ExperimentResult, load_experiment_results
from .stats import (APPROACH_TITLES, PAIR_ORDER, MissingCellError, Table,
                    best_bacc_table, comparison_table)

log = logging.getLogger(__name__)

COMPARISONS = [
    ("binary_vs_multiclass", Approach.BINARY_BINARY.value, Approach.MULTI_MULTI.value),
    ("binary_classifications", Approach.BINARY_BINARY.value, Approach.MULTI_BINARY.value),
]


class ReportError(RuntimeError):
    pass


def _write_table(table: Table, out_dir: Path, stem: str) -> None:
    (out_dir / f"{stem}.csv").write_text(table.to_csv())
    (out_dir / f"{stem}.txt").write_text(table.to_text())


def _distribution_csv(results: dict, out_dir: Path) -> None:
    lines = ["approach,pair,run_index,bacc"]
    for (approach, pair), res in sorted(results.items()):
        for rec in res.runs:
            if not rec.failed:
                lines.append(f"{approach},{pair},{rec.run_index},{rec.bacc:.6f}")
    (out_dir / "bacc_distributions.csv").write_text("\n".join(lines) + "\n")


def _boxplot(results: dict, approach_a: str, approach_b: str, pairs: list[str],
             out_path: Path) -> None:
    fig, ax = plt.subplots(figsize=(9, 5))
    data, positions, colors = [], [], []
    for i, pair in enumerate(pairs):
        for j, approach in enumerate((approach_a, approach_b)):
            res = results.get((approach, pair))
            if res and res.baccs:
                data.append(res.baccs)
                positions.append(i * 3 + j)
                colors.append("tab:blue" if j == 0 else "tab:orange")
    bp = ax.boxplot(data, positions=positions, widths=0.8, patch_artist=True)
    for patch, color in zip(bp["boxes"], colors):
        patch.set_facecolor(color)
    ax.set_xticks([i * 3 + 0.5 for i in range(len(pairs))])
    ax.set_xticklabels(pairs)
    ax.set_xlabel("Filter pair")
    ax.set_ylabel("Balanced accuracy")
    ax.set_title(f"{APPROACH_TITLES.get(approach_a, approach_a)} vs "
                 f"{APPROACH_TITLES.get(approach_b, approach_b)}")
    ax.legend(handles=[plt.Rectangle((0, 0), 1, 1, fc="tab:blue"),
                       plt.Rectangle((0, 0), 1, 1, fc="tab:orange")],
              labels=[APPROACH_TITLES.get(approach_a, approach_a),
                      APPROACH_TITLES.get(approach_b, approach_b)],
              loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def generate_report(results_dir, out_dir=None, alpha: float = 0.05) -> list[str]:
    """Regenerate all tables, distribution CSVs, and figures from persisted
    run records.  Returns the list of files written; comparisons whose cells
    are missing are skipped with a notice."""
    results_dir = Path(results_dir)
    results = load_experiment_results(results_dir)
    if not results:
        raise ReportError(f"{results_dir}: no run records found")
    out_dir = Path(out_dir) if out_dir else results_dir / "report"
    out_dir.mkdir(parents=True, exist_ok=True)
    pairs = [p for p in PAIR_ORDER if any(k[1] == p for k in results)]
    extra = sorted({k[1] for k in results} - set(pairs))
    pairs += extra
    written: list[str] = []

    for stem, a, b in COMPARISONS:
        try:
            table = comparison_table(results, a, b, alpha, pairs)
        except MissingCellError as exc:
            log.warning("skipping comparison %s: %s", stem, exc)
            continue
        _write_table(table, out_dir, f"comparison_{stem}")
        written += [f"comparison_{stem}.csv", f"comparison_{stem}.txt"]
        fig_name = f"bacc_{stem}.png"
        _boxplot(results, a, b, pairs, out_dir / fig_name)
        written.append(fig_name)

    approaches = [a.value for a in Approach if any(k[0] == a.value for k in results)]
    try:
        table = best_bacc_table(results, approaches, pairs)
        _write_table(table, out_dir, "best_bacc")
        written += ["best_bacc.csv", "best_bacc.txt"]
    except MissingCellError as exc:
        log.warning("best-bACC table partial/skipped: %s", exc)

    _distribution_csv(results, out_dir)
    written.append("bacc_distributions.csv")
    return written
