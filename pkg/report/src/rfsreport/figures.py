"""Render benchmark figures from the experiment CSVs.

Consumes only the two CSV schemas the tracking harness writes:

    per_step:  run,step,sensor,filter_kind,mode,t_fit,ospa,ospa_loc,ospa_card,n_est,n_true
    aggregate: mode,t_fit,sensor,filter_kind,mean_ospa,mean_loc,mean_card,mean_fusion_time_ns

Three figures are available: ospa_time (per-sensor OSPA/loc/card over time,
run-averaged), ospa_vs_t (aggregate mean OSPA against the fit iteration
count with the baselines as horizontal lines), and timing (mean fusion time
against the iteration count).  Output is deterministic: fixed styling, a
fixed SVG hash salt, and no embedded timestamps, so re-rendering the same
CSVs yields byte-identical files.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import matplotlib
import numpy as np
import pandas as pd

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "rfsreport"
import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

FIGURES = ("ospa_time", "ospa_vs_t", "timing")

PER_STEP_COLUMNS = (
    "run", "step", "sensor", "filter_kind", "mode", "t_fit",
    "ospa", "ospa_loc", "ospa_card", "n_est", "n_true",
)
AGGREGATE_COLUMNS = (
    "mode", "t_fit", "sensor", "filter_kind",
    "mean_ospa", "mean_loc", "mean_card", "mean_fusion_time_ns",
)

_SAVE_KWARGS = {"metadata": {"Date": None}}


class SchemaError(ValueError):
    """An input CSV is missing a required column."""


@dataclass(frozen=True)
class ReportSpec:
    per_step_csv: str
    aggregate_csv: str
    out_dir: str
    figures: tuple[str, ...] = FIGURES
    image_format: str = "svg"

    def __post_init__(self):
        object.__setattr__(self, "figures", tuple(self.figures))
        unknown = set(self.figures) - set(FIGURES)
        if unknown:
            raise ValueError(f"unknown figures {sorted(unknown)}; available: {FIGURES}")
        if self.image_format not in ("svg", "png"):
            raise ValueError(f"image format must be svg or png, got {self.image_format!r}")


@dataclass
class ReportResult:
    """Rendered paths plus the exact data series each figure plotted."""

    images: dict = field(default_factory=dict)
    summary_path: str = ""
    plotted: dict = field(default_factory=dict)


def _load(path: str, required) -> pd.DataFrame:
    df = pd.read_csv(path)
    for col in required:
        if col not in df.columns:
            raise SchemaError(f"{os.path.basename(path)} is missing column {col!r}")
    return df


def _group_label(mode, t_fit) -> str:
    return f"{mode}@t{t_fit}" if mode == "fit" else str(mode)


def _save(fig, spec: ReportSpec, name: str) -> str:
    path = os.path.join(spec.out_dir, f"{name}.{spec.image_format}")
    fig.savefig(path, format=spec.image_format, **_SAVE_KWARGS)
    plt.close(fig)
    return path


def _render_ospa_time(per_step: pd.DataFrame, spec: ReportSpec):
    metrics = ("ospa", "ospa_loc", "ospa_card")
    fig, axes = plt.subplots(3, 1, figsize=(8, 9), sharex=True)
    plotted = {}
    if not per_step.empty:
        averaged = (
            per_step.groupby(["mode", "t_fit", "sensor", "step"], sort=True)[list(metrics)]
            .mean()
            .reset_index()
        )
        for (mode, t_fit, sensor), sub in averaged.groupby(["mode", "t_fit", "sensor"], sort=True):
            label = f"s{sensor} {_group_label(mode, t_fit)}"
            for ax, metric in zip(axes, metrics):
                ax.plot(sub["step"], sub[metric], label=label, linewidth=1.0)
            plotted[label] = sub.reset_index(drop=True)
    for ax, metric in zip(axes, metrics):
        ax.set_ylabel(f"{metric} (m)")
        ax.grid(True, alpha=0.3)
    axes[0].set_title("run-averaged OSPA over time")
    axes[-1].set_xlabel("step")
    if plotted:
        axes[0].legend(fontsize=6, ncol=2)
    return fig, plotted


def _render_ospa_vs_t(aggregate: pd.DataFrame, spec: ReportSpec):
    fig, ax = plt.subplots(figsize=(7, 5))
    plotted = {}
    fit = aggregate[aggregate["mode"] == "fit"]
    for sensor, sub in fit.groupby("sensor", sort=True):
        sub = sub.sort_values("t_fit")
        label = f"s{sensor} ({sub['filter_kind'].iloc[0]})"
        ax.plot(sub["t_fit"], sub["mean_ospa"], marker="o", label=label)
        plotted[label] = sub[["t_fit", "mean_ospa"]].reset_index(drop=True)
    for mode, style in (("noncooperative", ":"), ("cc_only", "--")):
        sub = aggregate[aggregate["mode"] == mode]
        if not sub.empty:
            level = float(sub["mean_ospa"].mean())
            ax.axhline(level, linestyle=style, color="gray", label=mode)
            plotted[mode] = sub[["sensor", "mean_ospa"]].reset_index(drop=True)
    ax.set_xlabel("weight-fit iterations t")
    ax.set_ylabel("mean OSPA (m)")
    ax.set_title("mean OSPA against fit iteration count")
    ax.grid(True, alpha=0.3)
    if plotted:
        ax.legend(fontsize=7)
    return fig, plotted


def _render_timing(aggregate: pd.DataFrame, spec: ReportSpec):
    fig, ax = plt.subplots(figsize=(7, 4))
    plotted = {}
    fit = aggregate[aggregate["mode"] == "fit"]
    if not fit.empty:
        per_t = fit.groupby("t_fit", sort=True)["mean_fusion_time_ns"].mean() / 1e6
        ax.plot(per_t.index, per_t.values, marker="s", label="fusion")
        plotted["fusion"] = per_t.reset_index()
    ax.set_xlabel("weight-fit iterations t")
    ax.set_ylabel("mean fusion time (ms)")
    ax.set_title("fusion time against fit iteration count")
    ax.grid(True, alpha=0.3)
    if plotted:
        ax.legend(fontsize=8)
    return fig, plotted


def write_summary(aggregate: pd.DataFrame, out_dir: str) -> str:
    """Plain-text grand-mean OSPA per (mode, t_fit), straight from the CSV."""
    path = os.path.join(out_dir, "summary.txt")
    lines = ["mode t_fit grand_mean_ospa"]
    if not aggregate.empty:
        for (mode, t_fit), sub in aggregate.groupby(["mode", "t_fit"], sort=True):
            lines.append(f"{mode} {t_fit} {float(np.mean(sub['mean_ospa']))!r}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


_RENDERERS = {
    "ospa_time": (_render_ospa_time, "per_step"),
    "ospa_vs_t": (_render_ospa_vs_t, "aggregate"),
    "timing": (_render_timing, "aggregate"),
}


def render_report(spec: ReportSpec) -> ReportResult:
    """Render the selected figures plus the summary file; deterministic."""
    os.makedirs(spec.out_dir, exist_ok=True)
    per_step = aggregate = None
    result = ReportResult()
    for name in spec.figures:
        renderer, source = _RENDERERS[name]
        if source == "per_step":
            if per_step is None:
                per_step = _load(spec.per_step_csv, PER_STEP_COLUMNS)
            fig, plotted = renderer(per_step, spec)
        else:
            if aggregate is None:
                aggregate = _load(spec.aggregate_csv, AGGREGATE_COLUMNS)
            fig, plotted = renderer(aggregate, spec)
        result.images[name] = _save(fig, spec, name)
        result.plotted[name] = plotted
    if aggregate is None:
        aggregate = _load(spec.aggregate_csv, AGGREGATE_COLUMNS)
    result.summary_path = write_summary(aggregate, spec.out_dir)
    return result
