"""Matplotlib figure rendering for the report-producing subcommands.

Figures are rendered headlessly to files next to the delimited output.
Nothing here feeds back into computations; byte-determinism is kept by
pinning figure geometry and stripping volatile PNG metadata.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_SAVE_KW = {"dpi": 110, "metadata": {"Software": None}}


def _new_axes(title: str):
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    return fig, ax


def save_sweep(path: str, ts, ws, tents, label: str) -> None:
    fig, ax = _new_axes(f"excursion profile: {label}")
    ts = np.asarray(ts)
    ax.plot(ts, ws, lw=0.9, label="w (lattice)")
    ax.plot(ts, np.asarray(tents), lw=0.9, ls="--", label="tent")
    ax.plot(ts, np.asarray(ws) - np.asarray(tents), lw=0.8, label="excess")
    ax.axhline(2 * np.log(2), color="gray", lw=0.6, ls=":", label="2 log 2")
    ax.set_xlabel("t")
    ax.legend(loc="upper left", fontsize=8)
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_events(path: str, events, threshold: float | None, label: str) -> None:
    fig, ax = _new_axes(f"excursion minima: {label}")
    if events:
        ax.scatter([ev.t for ev in events], [ev.value for ev in events], s=14)
    if threshold is not None:
        ax.axhline(threshold, color="crimson", lw=0.8, ls="--", label="-log delta")
        ax.legend(fontsize=8)
    ax.set_xlabel("t")
    ax.set_ylabel("minimum value")
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_quotients(path: str, quotients, label: str) -> None:
    fig, ax = _new_axes(f"dimension quotients: {label}")
    js = np.arange(1, len(quotients) + 1)
    ax.plot(js, quotients, marker="o", ms=3, lw=0.8)
    ax.set_xlabel("depth j")
    ax.set_ylabel("quotient")
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
