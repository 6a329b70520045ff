"""Render sweep and Monte Carlo result tables to figure files.

The CLI report path writes CSV first and can additionally render the same
rows with matplotlib (--figure).  Rendering is file-based only (Agg
backend); nothing here opens a display.
"""
from __future__ import annotations

import csv
import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

__all__ = ["render_sweep_figure", "render_mc_figure"]


def _read_rows(csv_path):
    with open(csv_path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _loggable(values):
    return all(v > 0 for v in values)


def render_sweep_figure(csv_path, fig_path, title=None):
    """Plot every MSE column of a sweep CSV against the sweep axis."""
    rows = _read_rows(csv_path)
    if not rows:
        raise ValueError(f"no data rows in {csv_path}")
    axis = rows[0]["axis"]
    x = [float(r["value"]) for r in rows]
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    for col in rows[0]:
        if not col.startswith(("mse_H_", "mse_X_")):
            continue
        y = [float(r[col]) for r in rows]
        ax.plot(x, y, marker=".", label=col)
    if _loggable(x):
        ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(axis)
    ax.set_ylabel("MSE")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.savefig(fig_path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def render_mc_figure(csv_path, fig_path, title=None):
    """Plot empirical MSEs with error bars next to their predictions."""
    rows = _read_rows(csv_path)
    if not rows:
        raise ValueError(f"no data rows in {csv_path}")
    x = [float(r["value"]) for r in rows]
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    for col in rows[0]:
        if not col.startswith(("mse_H_", "mse_X_")):
            continue
        y = [float(r[col]) for r in rows]
        if all(math.isnan(v) for v in y):
            continue
        err_col = "stderr_" + col
        err = [float(r.get(err_col, "nan")) for r in rows]
        if any(math.isfinite(e) for e in err):
            ax.errorbar(x, y, yerr=[0.0 if not math.isfinite(e) else e for e in err],
                        marker="o", linestyle="", capsize=3, label=col + " (empirical)")
        else:
            ax.plot(x, y, marker="o", linestyle="", label=col + " (empirical)")
        pred_col = "pred_" + col
        if pred_col in rows[0]:
            p = [float(r[pred_col]) for r in rows]
            if not all(math.isnan(v) for v in p):
                ax.plot(x, p, marker="", linestyle="--", label=col + " (predicted)")
    ax.set_xlabel(rows[0]["axis"])
    ax.set_ylabel("MSE")
    if _loggable(x):
        ax.set_xscale("log")
    ax.set_yscale("log")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.savefig(fig_path, dpi=150, bbox_inches="tight")
    plt.close(fig)
