"""Run artifacts: delimited metrics, JSON report, and defense weights."""

from __future__ import annotations

import json
from pathlib import Path


def metrics_csv_text(metrics, scheme: str, attack: str, defense: bool, clients: int) -> str:
    """Render the per-round metrics table.

    Columns: round, scheme, attack, defense, mean accuracy/loss, then one
    accuracy column per client.  Floats use repr for byte-stable reruns.
    """
    header = ["round", "scheme", "attack", "defense", "mean_test_accuracy", "mean_test_loss"]
    header += [f"client_{k}_accuracy" for k in range(clients)]
    lines = [",".join(header)]
    defense_text = "on" if defense else "off"
    for row in metrics:
        cells = [
            str(row.round),
            scheme,
            attack,
            defense_text,
            repr(row.mean_test_accuracy),
            repr(row.mean_test_loss),
        ]
        cells += [repr(acc) for acc in row.per_client_accuracy]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def write_metrics_csv(path, metrics, scheme, attack, defense, clients):
    Path(path).write_text(metrics_csv_text(metrics, scheme, attack, defense, clients))


def shuffle_table_document(table, eta: float, seed: int) -> dict:
    return {
        "classes": {str(c): list(perm) for c, perm in sorted(table.per_class.items())},
        "eta": eta,
        "seed": seed,
    }


def build_report(config: dict, metrics, trace, wall_clock_seconds: float) -> dict:
    """Assemble the full run report: config echo, metrics, score summary,
    and the defense weight history."""
    rounds = [
        {
            "round": row.round,
            "mean_test_accuracy": row.mean_test_accuracy,
            "mean_test_loss": row.mean_test_loss,
            "per_client_accuracy": list(row.per_client_accuracy),
        }
        for row in metrics
    ]
    scores = None
    if trace is not None and trace.score_history:
        scores = {
            "s1_mean": sum(r["s1_mean"] for r in trace.score_history) / len(trace.score_history),
            "s2_mean": sum(r["s2_mean"] for r in trace.score_history) / len(trace.score_history),
            "per_round": trace.score_history,
        }
    return {
        "config": config,
        "rounds": rounds,
        "malicious_clients": list(trace.malicious_ids) if trace is not None else [],
        "poisoning_scores": scores,
        "defense_weights": list(trace.weight_history) if trace is not None else [],
        "wall_clock_seconds": wall_clock_seconds,
    }


def write_json(path, document: dict):
    Path(path).write_text(json.dumps(document, indent=2, sort_keys=True) + "\n")
