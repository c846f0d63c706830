"""Figure builders: drift curves from diagnostics tables, phase-space
heatmaps from snapshots, and circulation-loop panels."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .formats import FormatError, read_snapshot, read_table


def plot_series(csv_path, columns, out_path, logscale=False):
    """Line plot of named diagnostics columns against t."""
    table = read_table(csv_path)
    if "t" not in table:
        raise FormatError(f"{csv_path}: no 't' column")
    missing = [c for c in columns if c not in table]
    if missing:
        raise FormatError(f"{csv_path}: unknown column(s) {', '.join(missing)}; "
                          f"available: {', '.join(table)}")
    fig, ax = plt.subplots(figsize=(7, 4))
    for c in columns:
        ax.plot(table["t"], table[c], label=c, lw=1.2)
    ax.set_xlabel("t")
    ax.set_ylabel(", ".join(columns))
    if logscale:
        ax.set_yscale("log")
    ax.legend(loc="best", fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return out_path


def plot_drift(csv_path, columns, out_path):
    """Absolute drift |c(t) - c(0)| of the named columns, log scale."""
    table = read_table(csv_path)
    missing = [c for c in columns if c not in table]
    if missing:
        raise FormatError(f"{csv_path}: unknown column(s) {', '.join(missing)}; "
                          f"available: {', '.join(table)}")
    fig, ax = plt.subplots(figsize=(7, 4))
    for c in columns:
        drift = np.abs(table[c] - table[c][0])
        ax.semilogy(table["t"], np.maximum(drift, 1e-18), label=f"|{c}(t) - {c}(0)|", lw=1.2)
    ax.set_xlabel("t")
    ax.set_ylabel("absolute drift")
    ax.legend(loc="best", fontsize=8)
    ax.grid(alpha=0.3, which="both")
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return out_path


def plot_heatmap(snapshot_path, out_path, slice_index=0, magnitude=True):
    """Phase-space heatmap of a snapshot.

    Rank-2 snapshots (real fields like the classical density) are drawn
    directly; rank-3 snapshots are sliced at the given quantum index and
    drawn as |psi|^2 (or the real part when magnitude=False).
    """
    snap = read_snapshot(snapshot_path)
    a = snap.data
    if a.ndim == 2:
        field = a.real
        title = "field(q, p)"
    elif a.ndim == 3:
        if not 0 <= slice_index < a.shape[2]:
            raise FormatError(f"{snapshot_path}: slice {slice_index} out of range "
                              f"for quantum axis of size {a.shape[2]}")
        sl = a[:, :, slice_index]
        field = (np.abs(sl) ** 2) if magnitude else sl.real
        kind = "|psi|^2" if magnitude else "Re field"
        title = f"{kind} at quantum index {slice_index}"
    else:
        raise FormatError(f"{snapshot_path}: cannot draw rank-{a.ndim} snapshot")
    fig, ax = plt.subplots(figsize=(5.4, 4.5))
    im = ax.imshow(field.T, origin="lower", aspect="auto", cmap="viridis")
    ax.set_xlabel("q index")
    ax.set_ylabel("p index")
    ax.set_title(title, fontsize=10)
    fig.colorbar(im, ax=ax, shrink=0.85)
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return out_path


def plot_loops(csv_path, out_path):
    """Circulation integral over time plus both sides of its rate law."""
    table = read_table(csv_path)
    for col in ("t", "loop_integral", "lhs_rate", "rhs_rate"):
        if col not in table:
            raise FormatError(f"{csv_path}: missing column {col!r}; "
                              f"available: {', '.join(table)}")
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    ax1.plot(table["t"], table["loop_integral"], lw=1.2, color="tab:blue")
    ax1.set_ylabel("loop integral of p dq")
    ax1.grid(alpha=0.3)
    ok = ~np.isnan(table["lhs_rate"])
    ax2.plot(table["t"][ok], table["lhs_rate"][ok], label="d/dt loop integral", lw=1.2)
    ax2.plot(table["t"], table["rhs_rate"], label="loop integral of dV/dx dx",
             lw=1.0, ls="--")
    ax2.set_xlabel("t")
    ax2.set_ylabel("rate")
    ax2.legend(loc="best", fontsize=8)
    ax2.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return out_path
