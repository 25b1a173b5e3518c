"""Figure rendering for run reports.

Curves are written as PNG files next to the metrics CSV so a finished run
directory is self-contained: accuracy and loss per communication round,
plus the malicious weight mass per round when the defense ran.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_metric_curves(metrics, out_dir, title_suffix: str = ""):
    """Write accuracy.png and loss.png for one run."""
    out_dir = Path(out_dir)
    rounds = [row.round for row in metrics]
    suffix = f" ({title_suffix})" if title_suffix else ""

    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.plot(rounds, [row.mean_test_accuracy for row in metrics], marker="o")
    ax.set_xlabel("communication round")
    ax.set_ylabel("mean test accuracy")
    ax.set_ylim(0.0, 1.0)
    ax.set_title(f"Test accuracy{suffix}")
    ax.grid(alpha=0.3)
    _save(fig, out_dir / "accuracy.png")

    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.plot(rounds, [row.mean_test_loss for row in metrics], marker="o", color="tab:red")
    ax.set_xlabel("communication round")
    ax.set_ylabel("mean test loss")
    ax.set_title(f"Test loss{suffix}")
    ax.grid(alpha=0.3)
    _save(fig, out_dir / "loss.png")


def render_weight_mass(weight_history, malicious_ids, out_dir):
    """Write malicious_weight.png: summed aggregation weight of malicious
    clients per round."""
    out_dir = Path(out_dir)
    rounds = [entry["round"] for entry in weight_history]
    mass = [
        sum(entry["w_k"][k] for k in malicious_ids) if malicious_ids else 0.0
        for entry in weight_history
    ]
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.plot(rounds, mass, marker="s", color="tab:purple")
    ax.set_xlabel("communication round")
    ax.set_ylabel("malicious weight mass")
    ax.set_ylim(0.0, 1.0)
    ax.set_title("Aggregation weight captured by malicious clients")
    ax.grid(alpha=0.3)
    _save(fig, out_dir / "malicious_weight.png")
