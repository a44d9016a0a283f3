"""Render sweep outputs as figures next to their CSV files."""

from __future__ import annotations

from collections import defaultdict


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _series_by_label(rows, label_col: int, x_col: int, y_col: int, err_col=None):
    series = defaultdict(lambda: ([], [], []))
    for row in rows:
        xs, ys, es = series[str(row[label_col])]
        xs.append(row[x_col])
        ys.append(row[y_col])
        es.append(row[err_col] if err_col is not None else 0.0)
    return series


def render_sweep(kind: str, header, rows, out_path) -> None:
    """Write a PNG for one sweep's rows (same tuples as the CSV body)."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    if kind == "figure4":
        series = _series_by_label(rows, label_col=1, x_col=0, y_col=2)
        for label in sorted(series, key=lambda s: float(s)):
            xs, ys, _ = series[label]
            ax.plot(xs, ys, marker="o", label=f"capacity {label}")
        ax.set_ylabel("best masking probability")
        ax.set_ylim(-0.05, 1.05)
    else:
        series = _series_by_label(rows, label_col=1, x_col=0, y_col=2, err_col=3)

        def order(label):
            if label == "inf":
                return (2, 0.0)
            try:
                return (1, float(label))
            except ValueError:
                return (0, 0.0 if label == "0_known" else 1.0)

        for label in sorted(series, key=order):
            xs, ys, es = series[label]
            pretty = {"0_known": "no battery (state seen)", "0_unknown": "no battery",
                      "inf": "unbounded battery"}.get(label, f"capacity {label}")
            if any(e > 0 for e in es):
                ax.errorbar(xs, ys, yerr=[3 * e for e in es], marker="o",
                            capsize=2, label=pretty)
            else:
                ax.plot(xs, ys, marker="o", label=pretty)
        ax.set_ylabel("leakage (bits per slot)")
    ax.set_xlabel("generation rate p_e")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)


def render_curve(xs, ys, xlabel: str, ylabel: str, out_path) -> None:
    """Single-series helper for point commands (leakage curves, scans)."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(xs, ys, marker="o")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
