"""Minimal static figures for batch reports (SVG through matplotlib's Agg backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed id salt and no timestamp, so the same data always gives the same file
_RC = {
    "svg.hashsalt": "icsqr",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
}
_METADATA = {"Date": None, "Creator": None}


def _save(fig, path):
    fig.savefig(path, format="svg", metadata=_METADATA)
    plt.close(fig)


def sweep_figure(report, path):
    """Eigenvalues against ``k``, one panel per scatter pair (rows) and
    algorithm (columns), log-scaled y axis. Failed runs are left as gaps."""
    pairs, algorithms = report.pairs, report.algorithms
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(
            len(pairs),
            len(algorithms),
            figsize=(3.2 * len(algorithms), 2.6 * len(pairs)),
            squeeze=False,
            sharex=True,
        )
        ks = np.asarray(report.grid, dtype=float)
        for i, pair in enumerate(pairs):
            for j, alg in enumerate(algorithms):
                ax = axes[i, j]
                table = report.eigenvalue_table(pair, alg)
                for col in range(table.shape[1]):
                    ax.plot(ks, table[:, col], marker="o", ms=2.5, lw=1.0, label=f"$\\lambda_{col + 1}$")
                failed = ks[np.isnan(table).all(axis=1)]
                if failed.size:
                    ax.axvspan(failed.min() - 0.5, ks.max() + 0.5, color="0.92", zorder=0)
                if np.isfinite(table).any() and np.nanmin(table) > 0:
                    ax.set_yscale("log")
                ax.set_title(f"{pair}  [{alg.value}]")
                if i == len(pairs) - 1:
                    ax.set_xlabel("k  (condition number $10^k$)")
                if j == 0:
                    ax.set_ylabel("eigenvalue")
        axes[0, -1].legend(loc="upper right", frameon=False, fontsize=7)
        fig.tight_layout()
        _save(fig, path)


def distances_figure(d2, path, top=None, title="squared ICS distances"):
    """Index plot of ``d2``; the ``top`` largest values are marked and labelled."""
    d2 = np.asarray(d2, dtype=float)
    idx = np.arange(1, d2.size + 1)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.0, 3.0))
        ax.plot(idx, d2, ls="none", marker=".", ms=3, color="0.35")
        if top:
            best = np.argsort(-d2, kind="stable")[:top]
            ax.plot(idx[best], d2[best], ls="none", marker="o", ms=4, mfc="none", color="C3")
            for b in best:
                ax.annotate(str(b + 1), (idx[b], d2[b]), xytext=(3, 3), textcoords="offset points", fontsize=7)
        ax.set_xlabel("observation")
        ax.set_ylabel("ICSD$^2$")
        ax.set_title(title)
        fig.tight_layout()
        _save(fig, path)
