"""Census figures for a batch run, rendered to image files.

Two plots: how often each defect kind occurs across the corpus, and how
contract size and control-flow complexity move with the number of distinct
defect kinds in a contract.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .batch import CorpusStats
from .report import DefectKind, DefectReport


def plot_defect_counts(stats: CorpusStats, path: Path) -> None:
    kinds = [k.value for k in DefectKind]
    counts = [stats.per_defect_counts[k] for k in DefectKind]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(kinds, counts, color="#33557a")
    ax.set_ylabel("contracts with the defect")
    ax.set_title(f"Defects across {stats.contracts_total} distinct contracts")
    for x, c in enumerate(counts):
        ax.text(x, c, str(c), ha="center", va="bottom", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_complexity_trend(reports: list[DefectReport], path: Path) -> None:
    """Mean instruction count and cyclomatic complexity, grouped by the
    number of distinct defect kinds found per contract."""
    groups: dict[int, list[DefectReport]] = {}
    for r in reports:
        groups.setdefault(len(r.kinds), []).append(r)
    xs = sorted(groups)
    mean_instr = [sum(r.instructions_total for r in groups[x]) / len(groups[x]) for x in xs]
    mean_cc = [sum(r.cyclomatic_complexity for r in groups[x]) / len(groups[x]) for x in xs]

    fig, ax_left = plt.subplots(figsize=(7, 4))
    ax_right = ax_left.twinx()
    ax_left.plot(xs, mean_instr, marker="o", color="#33557a", label="instructions")
    ax_right.plot(xs, mean_cc, marker="s", color="#b2522d", label="cyclomatic complexity")
    ax_left.set_xlabel("distinct defect kinds in contract")
    ax_left.set_ylabel("mean instructions")
    ax_right.set_ylabel("mean cyclomatic complexity")
    ax_left.set_xticks(xs)
    lines = ax_left.get_lines() + ax_right.get_lines()
    ax_left.legend(lines, [ln.get_label() for ln in lines], loc="upper left")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_corpus_figures(
    stats: CorpusStats,
    reports: list[DefectReport],
    outdir: str | Path,
) -> list[Path]:
    """Write the census figures next to the batch reports; returns the paths."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    counts_path = out / "defect_counts.png"
    plot_defect_counts(stats, counts_path)
    written.append(counts_path)
    if reports:
        trend_path = out / "complexity_by_defects.png"
        plot_complexity_trend(reports, trend_path)
        written.append(trend_path)
    return written
