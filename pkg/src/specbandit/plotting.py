"""Line plots of best-arm curves, written as reproducible SVG."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# fixed salt and no date so identical inputs give identical files
matplotlib.rcParams["svg.hashsalt"] = "specbandit"
_SVG_META = {"Date": None}


def _save(fig, path: str) -> None:
    try:
        fig.savefig(path, format="svg", metadata=_SVG_META)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    finally:
        plt.close(fig)


def plot_best_arm_curves(curves: dict, path: str, title: str = "Best arm ratio over rounds") -> None:
    """One line per labelled curve, with a +/- 1 SE band."""
    fig, ax = plt.subplots(figsize=(6, 3.6))
    for label, curve in curves.items():
        x = range(len(curve.ratio))
        ax.plot(x, curve.ratio, lw=1.2, label=label)
        ax.fill_between(x, curve.ratio - curve.se, curve.ratio + curve.se, alpha=0.2, lw=0)
    ax.set_xlabel("round")
    ax.set_ylabel("best arm ratio")
    ax.set_ylim(0, 1.02)
    ax.set_title(title)
    ax.legend(frameon=False)
    fig.tight_layout()
    _save(fig, path)


def plot_sweep(values, means, path: str, xlabel: str, ylabel: str) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.4))
    ax.plot([str(v) for v in values], means, marker="o")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    _save(fig, path)
