"""Figure rendering for scan curves, schedule heatmaps, and summary tables.

Figures are written next to the delimited outputs so a report directory is
self-contained; all rendering goes through the non-interactive backend.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")  # why: render straight to files; no display in batch runs

import matplotlib.pyplot as plt
import numpy as np

MAX_MARKED_PEAKS = 10


def scan_figure(result, path: str | Path) -> None:
    """Quality-versus-time curve with the best peaks marked."""
    taus = [rec.tau_reg for rec in result.records]
    lams = [rec.best_lambda for rec in result.records]
    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.plot(taus, lams, lw=1.0, color="tab:blue")
    marked = list(result.peaks)[:MAX_MARKED_PEAKS]
    if marked:
        ax.plot(
            [taus[i] for i in marked],
            [lams[i] for i in marked],
            "o",
            color="tab:red",
            ms=5,
            label=f"best {len(marked)} peaks",
        )
        ax.legend(loc="best")
    ax.set_xlabel(r"registration time $\tau_{reg}$")
    ax.set_ylabel(r"transmission quality $\lambda$")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def heatmap_figure(amplitudes: np.ndarray, path: str | Path, title: str | None = None) -> None:
    """Damping-rate table as a grayscale plate: rows sites, columns subintervals."""
    amplitudes = np.asarray(amplitudes)
    n_sites, k_gamma = amplitudes.shape
    fig, ax = plt.subplots(figsize=(1.2 + 0.9 * k_gamma, 1.0 + 0.45 * n_sites))
    image = ax.imshow(
        amplitudes, cmap="gray_r", vmin=0.0, vmax=1.0, aspect="auto", interpolation="nearest"
    )
    ax.set_xticks(range(k_gamma), [str(j + 1) for j in range(k_gamma)])
    ax.set_yticks(range(n_sites), [str(k + 1) for k in range(n_sites)])
    ax.set_xlabel("subinterval")
    ax.set_ylabel("site")
    if title:
        ax.set_title(title)
    fig.colorbar(image, ax=ax, label="damping rate")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def table_figure(rows: list[dict], path: str | Path) -> None:
    """Summary markers of quality per chain length for the reference table."""
    ns = [row["n_sites"] for row in rows]
    lams = [row["lambda"] for row in rows]
    lams_max = [row["lambda_max"] for row in rows]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(ns, lams, "o-", color="tab:blue", label=r"$\lambda$")
    ax.plot(ns, lams_max, "s--", color="tab:orange", label=r"$\lambda_{max}$")
    ax.set_xlabel("chain length $N$")
    ax.set_ylabel("quality")
    ax.set_xticks(ns)
    ax.grid(alpha=0.3)
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
