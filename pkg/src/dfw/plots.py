"""SVG figures drawn from the CSV files a run leaves behind.

The CSVs are the data of record; the SVGs are a thin rendering of them.
Output is byte-stable: a fixed hash salt for element ids and no date
metadata.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .balance import SMD_THRESHOLD  # noqa: E402
from .errors import DFWError, EXIT_IO  # noqa: E402


class PlotIOError(DFWError):
    exit_code = EXIT_IO


_RC = {"svg.hashsalt": "dfw", "svg.fonttype": "path", "font.size": 9}


def _read(path: Path):
    try:
        with path.open(newline="") as fh:
            return list(csv.DictReader(fh))
    except OSError as exc:
        raise PlotIOError(f"cannot read {path}: {exc}") from exc


def _save(fig, path: Path):
    try:
        fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as exc:
        raise PlotIOError(f"cannot write {path}: {exc}") from exc
    finally:
        plt.close(fig)
    return path


def plot_smd(smd_csv: Path, out: Path) -> Path:
    rows = _read(smd_csv)
    by_scheme = defaultdict(dict)
    for r in rows:
        by_scheme[r["scheme"]][r["feature"]] = float(r["abs_smd_mean"]) if r["abs_smd_mean"] else float("nan")
    features = list(dict.fromkeys(r["feature"] for r in rows))
    schemes = list(by_scheme)
    fig, ax = plt.subplots(figsize=(6.0, 0.4 * len(features) + 1.5))
    height = 0.8 / len(schemes)
    for i, scheme in enumerate(schemes):
        ys = [j + i * height for j in range(len(features))]
        ax.barh(ys, [by_scheme[scheme].get(f, float("nan")) for f in features], height=height, label=scheme)
    ax.axvline(SMD_THRESHOLD, color="k", linestyle="--", linewidth=0.8)
    ax.set_yticks([j + 0.4 - height / 2 for j in range(len(features))], features)
    ax.set_xlabel("|SMD| (%)")
    ax.legend(fontsize=7)
    fig.tight_layout()
    return _save(fig, out)


def plot_ecdf(ecdf_csv: Path, out_dir: Path) -> list[Path]:
    rows = _read(ecdf_csv)
    traces = defaultdict(lambda: ([], []))
    for r in rows:
        xs, ys = traces[(r["scheme"], r["feature"], r["group"])]
        xs.append(float(r["value"]))
        ys.append(float(r["cumulative"]))
    paths = []
    for scheme in dict.fromkeys(k[0] for k in traces):
        features = list(dict.fromkeys(k[1] for k in traces if k[0] == scheme))
        fig, axes = plt.subplots(1, len(features), figsize=(2.2 * len(features), 2.2), squeeze=False)
        for ax, feat in zip(axes[0], features):
            for group in ("treated", "control"):
                xs, ys = traces.get((scheme, feat, group), ([], []))
                ax.step(xs, ys, where="post", label=group, linewidth=0.9)
            ax.set_title(feat)
        axes[0][0].legend(fontsize=6)
        fig.suptitle(scheme)
        fig.tight_layout()
        paths.append(_save(fig, out_dir / f"ecdf_{scheme.lower()}.svg"))
    return paths


def plot_cv_difference(cv_csv: Path, out: Path) -> Path:
    rows = _read(cv_csv)
    diffs = [float(r["difference"]) for r in rows]
    fig, ax = plt.subplots(figsize=(3.0, 3.5))
    ax.violinplot([diffs], showmedians=True)
    ax.axhline(0.0, color="k", linewidth=0.6)
    ax.set_ylabel("CV(IPW) - CV(DFW)")
    ax.set_xticks([])
    fig.tight_layout()
    return _save(fig, out)


def emit_plots(report_dir) -> list[Path]:
    """Render every figure whose CSV exists in ``report_dir``."""
    report_dir = Path(report_dir)
    if not report_dir.is_dir():
        raise PlotIOError(f"{report_dir} is not a directory")
    written = []
    with plt.rc_context(_RC):
        if (report_dir / "smd.csv").exists():
            written.append(plot_smd(report_dir / "smd.csv", report_dir / "smd.svg"))
        if (report_dir / "ecdf.csv").exists():
            written.extend(plot_ecdf(report_dir / "ecdf.csv", report_dir))
        if (report_dir / "cv_diff.csv").exists():
            written.append(plot_cv_difference(report_dir / "cv_diff.csv", report_dir / "cv_diff.svg"))
    if not written:
        raise PlotIOError(f"no plottable CSV files in {report_dir}")
    return written
