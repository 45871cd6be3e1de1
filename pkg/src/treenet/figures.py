"""Figure rendering for experiment reports.

Kept separate from the harness so that report generation never needs a
plotting backend; the command-line report path calls in here.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .bench import RunReport

_PANELS = (
    ("f1_weighted", "weighted F1 on the test split", "f1"),
    ("train_seconds", "training seconds", "time"),
    ("fps", "single-sample inferences per second", "fps"),
)


def render_report_figures(report: RunReport, base_path) -> list[Path]:
    """Write one PNG per tracked quantity next to the report files.

    Curves follow the per-fraction medians; faint points show every
    (fraction, repeat) cell. Returns the written paths.
    """
    base = Path(base_path)
    stem = base.with_suffix("") if base.suffix in (".json", ".csv") else base
    x = [s.chunk for s in report.summaries]
    written: list[Path] = []
    for key, ylabel, suffix in _PANELS:
        fig, ax = plt.subplots(figsize=(5.2, 3.4), dpi=130)
        if key in ("train_seconds", "fps"):
            cell = {"train_seconds": lambda r: r.train_seconds, "fps": lambda r: r.fps}[key]
        else:
            cell = lambda r, k=key: r.scalars[k]
        ax.scatter(
            [r.chunk for r in report.rows],
            [cell(r) for r in report.rows],
            s=14, alpha=0.45, color="#4878a8", label="repeat",
        )
        ax.plot(
            x, [s.medians[key] for s in report.summaries],
            marker="o", color="#1f4e79", label="median",
        )
        ax.set_xlabel("training-data fraction (chunk)")
        ax.set_ylabel(ylabel)
        ax.grid(True, alpha=0.3)
        ax.legend(loc="best", fontsize=8)
        fig.tight_layout()
        out = stem.parent / f"{stem.name}_{suffix}.png"
        fig.savefig(out)
        plt.close(fig)
        written.append(out)
    return written
