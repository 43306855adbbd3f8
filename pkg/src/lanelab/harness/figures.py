"""Matplotlib renderings written next to the delimited report output."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def suite_figure(report, path):
    """Grouped bars: lap seconds and position deviation per brain x condition;
    failed cells are drawn hatched at zero height."""
    n_cond = len(report.conditions)
    n_brain = len(report.brains)
    width = 0.8 / max(n_brain, 1)
    fig, (ax_lap, ax_dev) = plt.subplots(2, 1, figsize=(max(8, 1.6 * n_cond), 7), sharex=True)
    xs = np.arange(n_cond)
    for bi, brain in enumerate(report.brains):
        laps, devs, fails = [], [], []
        for ci in range(n_cond):
            cell = report.cells[(brain, ci)]
            fails.append(not cell["completed"])
            laps.append(cell["lap_seconds"] if cell["completed"] else 0.0)
            devs.append(cell["position_deviation_mae"])
        offset = (bi - (n_brain - 1) / 2) * width
        bars = ax_lap.bar(xs + offset, laps, width, label=brain)
        for bar, failed in zip(bars, fails):
            if failed:
                bar.set_hatch("//")
                bar.set_alpha(0.3)
        ax_dev.bar(xs + offset, devs, width)
    ax_lap.set_ylabel("lap seconds")
    ax_dev.set_ylabel("position deviation MAE [m]")
    ax_dev.set_xticks(xs)
    ax_dev.set_xticklabels(report.conditions, rotation=20, ha="right", fontsize=8)
    ax_lap.legend(fontsize=8)
    ax_lap.set_title(f"{report.kind} suite on {report.circuit} ({report.repeats} repeats)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def history_figure(history, path):
    """Train/val MSE and MAE curves over epochs (epoch 0 = initialization)."""
    epochs = [0] + [e["epoch"] for e in history.epochs]
    series = {
        "train_mse": [history.initial["train_mse"]] + [e["train_mse"] for e in history.epochs],
        "val_mse": [history.initial["val_mse"]] + [e["val_mse"] for e in history.epochs],
        "train_mae": [history.initial["train_mae"]] + [e["train_mae"] for e in history.epochs],
        "val_mae": [history.initial["val_mae"]] + [e["val_mae"] for e in history.epochs],
    }
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    for key in ("train_mse", "val_mse"):
        ax1.plot(epochs, series[key], label=key)
    for key in ("train_mae", "val_mae"):
        ax2.plot(epochs, series[key], label=key)
    ax1.set_yscale("log")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("MSE")
    ax2.set_xlabel("epoch")
    ax2.set_ylabel("MAE")
    for ax in (ax1, ax2):
        ax.legend(fontsize=8)
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def circuits_figure(tracks, path):
    """Silhouette grid of circuit centerlines."""
    n = len(tracks)
    cols = min(4, n)
    rows = -(-n // cols)
    fig, axes = plt.subplots(rows, cols, figsize=(3.2 * cols, 3.2 * rows))
    axes = np.atleast_1d(axes).ravel()
    for ax, track in zip(axes, tracks):
        pts = np.vstack([track.centerline, track.centerline[:1]])
        ax.plot(pts[:, 0], pts[:, 1], lw=2)
        ax.plot(*track.centerline[track.start_index], "k.", ms=8)
        ax.set_title(f"{track.name} ({track.tag})", fontsize=9)
        ax.set_aspect("equal")
        ax.axis("off")
    for ax in axes[n:]:
        ax.axis("off")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
