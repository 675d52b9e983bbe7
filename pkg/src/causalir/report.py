"""Evaluation report rendering: delimited per-topic metrics plus figures.

Everything lands in one directory: metrics.tsv with a row per topic and a
final "all" row holding the means, and two bar charts (AP and P@k per topic
with the mean drawn as a reference line).  Figures use the Agg backend so
report generation works headless.
"""

from __future__ import annotations

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluation import EvaluationReport

log = logging.getLogger(__name__)

METRICS_FILENAME = "metrics.tsv"


def _topic_sort_key(topic_id: str) -> tuple[int, str]:
    # Numeric topic ids sort numerically, everything else lexically after.
    return (0, f"{int(topic_id):020d}") if topic_id.isdigit() else (1, topic_id)


def write_metrics_tsv(path: Path, report: EvaluationReport) -> None:
    rows = sorted(report.per_topic, key=lambda m: _topic_sort_key(m.topic_id))
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("topic_id\tnum_retrieved\tnum_relevant\tap\tp_at_%d\n" % report.k)
        for m in rows:
            handle.write(
                f"{m.topic_id}\t{m.num_retrieved}\t{m.num_relevant}"
                f"\t{m.ap:.6f}\t{m.p_at_k:.6f}\n"
            )
        handle.write(
            f"all\t{sum(m.num_retrieved for m in rows)}"
            f"\t{sum(m.num_relevant for m in rows)}"
            f"\t{report.mean_ap:.6f}\t{report.mean_p_at_k:.6f}\n"
        )


def _bar_figure(
    path: Path,
    topic_ids: list[str],
    values: list[float],
    mean_value: float,
    ylabel: str,
    mean_label: str,
) -> None:
    width = max(6.0, 0.45 * len(topic_ids) + 2.0)
    fig, ax = plt.subplots(figsize=(width, 4.0))
    ax.bar(range(len(topic_ids)), values, color="#4878a8", edgecolor="black", linewidth=0.5)
    ax.axhline(mean_value, color="#b2182b", linestyle="--", linewidth=1.2,
               label=f"{mean_label} = {mean_value:.4f}")
    ax.set_xticks(range(len(topic_ids)))
    ax.set_xticklabels(topic_ids, rotation=45, ha="right", fontsize=8)
    ax.set_xlabel("topic")
    ax.set_ylabel(ylabel)
    ax.set_ylim(0.0, 1.05)
    ax.grid(axis="y", alpha=0.3)
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def write_evaluation_report(out_dir: str | Path, report: EvaluationReport) -> list[Path]:
    """Render metrics.tsv and the per-topic figures; returns written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    tsv_path = out / METRICS_FILENAME
    write_metrics_tsv(tsv_path, report)
    written.append(tsv_path)

    rows = sorted(report.per_topic, key=lambda m: _topic_sort_key(m.topic_id))
    topic_ids = [m.topic_id for m in rows]
    if topic_ids:
        ap_path = out / "ap_per_topic.png"
        _bar_figure(ap_path, topic_ids, [m.ap for m in rows], report.mean_ap,
                    "average precision", "MAP")
        written.append(ap_path)

        p_path = out / f"p_at_{report.k}_per_topic.png"
        _bar_figure(p_path, topic_ids, [m.p_at_k for m in rows], report.mean_p_at_k,
                    f"P@{report.k}", f"mean P@{report.k}")
        written.append(p_path)
    log.info("wrote evaluation report to %s (%d files)", out, len(written))
    return written
