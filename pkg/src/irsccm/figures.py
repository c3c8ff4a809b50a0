"""Figure rendering for sweep results: one estimation-quality plot and one
rate plot per sweep, written next to the CSV they summarize."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .sweep import SweepResult

_XLABELS = {
    "snr": "training SNR (dB)",
    "frames": "training frames T",
    "slots": "training slots J",
}


def render_sweep_figures(result: SweepResult, csv_path: str | Path) -> list[Path]:
    """Render <stem>_rem.png and <stem>_rate.png beside the CSV."""
    csv_path = Path(csv_path)
    xlabel = _XLABELS.get(result.sweep_name, result.sweep_name)
    x = [row.sweep_value for row in result.rows]
    written = []

    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    ax.errorbar(
        x, [r.rem_mean for r in result.rows],
        yerr=[r.rem_se for r in result.rows],
        marker="o", capsize=3, color="tab:blue",
    )
    ax.set_xlabel(xlabel)
    ax.set_ylabel("subspace efficiency")
    ax.set_ylim(0.0, 1.05)
    ax.grid(True, alpha=0.4)
    fig.tight_layout()
    rem_path = csv_path.with_name(csv_path.stem + "_rem.png")
    fig.savefig(rem_path, dpi=120)
    plt.close(fig)
    written.append(rem_path)

    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    series = (
        ("rate_est_mean", "rate_est_se", "estimated CCM", "tab:blue", "o"),
        ("rate_true_mean", "rate_true_se", "true CCM", "tab:green", "s"),
        ("rate_rand_mean", "rate_rand_se", "random phases", "tab:red", "^"),
    )
    for mean_col, se_col, label, color, marker in series:
        ax.errorbar(
            x, [getattr(r, mean_col) for r in result.rows],
            yerr=[getattr(r, se_col) for r in result.rows],
            marker=marker, capsize=3, color=color, label=label,
        )
    ax.set_xlabel(xlabel)
    ax.set_ylabel("mean achievable rate (bit/s/Hz)")
    ax.grid(True, alpha=0.4)
    ax.legend()
    fig.tight_layout()
    rate_path = csv_path.with_name(csv_path.stem + "_rate.png")
    fig.savefig(rate_path, dpi=120)
    plt.close(fig)
    written.append(rate_path)
    return written
