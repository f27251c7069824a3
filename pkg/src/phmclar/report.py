"""Render summary figures next to the experiment CSVs.

Reads the metric rows the runners emit and saves PNG files: state
recovery error, EM iteration counts and training likelihood against the
sweep variable for inference runs; per-horizon forecast error with
future states known versus hidden for forecast runs.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_STYLE = {
    "figure.figsize": (6.0, 4.0),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.dpi": 140,
    "savefig.bbox": "tight",
}


def read_rows(csv_path: str | Path) -> list[dict]:
    with Path(csv_path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def _grouped(rows, value_key):
    """sweep_value -> list of floats, skipping failed replicates."""
    groups: dict[float, list[float]] = defaultdict(list)
    for row in rows:
        if row.get("status", "ok") != "ok" or row[value_key] == "":
            continue
        groups[float(row["sweep_value"])].append(float(row[value_key]))
    return dict(sorted(groups.items()))


def _sweep_label(rows) -> str:
    names = {"P": "labelled share P (%)", "rho": "mean labelling error rho", "Q": "test labelled share Q (%)"}
    var = rows[0]["sweep_variable"] if rows else "P"
    return names.get(var, var)


def _band_plot(ax, groups, ylabel, xlabel):
    xs = np.array(list(groups))
    mean = np.array([np.mean(v) for v in groups.values()])
    lo = np.array([np.min(v) for v in groups.values()])
    hi = np.array([np.max(v) for v in groups.values()])
    ax.plot(xs, mean, marker="o", color="tab:blue", label="mean")
    ax.fill_between(xs, lo, hi, color="tab:blue", alpha=0.2, label="min-max")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend()


def render_inference_figures(rows: list[dict], out_dir: str | Path, stem: str = "inference") -> list[Path]:
    """One figure each for error, iterations, and likelihood; returns paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    xlabel = _sweep_label(rows)
    paths = []
    panels = [
        ("mpe", "mean percentage error"),
        ("em_iterations", "EM iterations"),
        ("train_loglik", "training log likelihood"),
    ]
    with plt.rc_context(_STYLE):
        for key, ylabel in panels:
            groups = _grouped(rows, key)
            if not groups:
                continue
            fig, ax = plt.subplots()
            _band_plot(ax, groups, ylabel, xlabel)
            path = out_dir / f"{stem}_{key}.png"
            fig.savefig(path)
            plt.close(fig)
            paths.append(path)
    return paths


def render_forecast_figures(rows: list[dict], out_dir: str | Path, stem: str = "forecast") -> list[Path]:
    """Error against horizon, one line per sweep value and state mode."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    series: dict[tuple[float, str], list[tuple[int, float]]] = defaultdict(list)
    for row in rows:
        key = (float(row["sweep_value"]), row["states"])
        series[key].append((int(row["h"]), float(row["rmse"])))
    if not series:
        return []
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for (value, mode), pts in sorted(series.items()):
            pts.sort()
            hs = [h for h, _ in pts]
            errs = [e for _, e in pts]
            style = "-" if mode == "known" else "--"
            ax.plot(hs, errs, style, marker="o", label=f"{rows[0]['sweep_variable']}={value:g}, states {mode}")
        ax.set_xlabel("forecast horizon h")
        ax.set_ylabel("RMSE")
        ax.legend()
        path = Path(out_dir) / f"{stem}_rmse.png"
        fig.savefig(path)
        plt.close(fig)
    return [path]
