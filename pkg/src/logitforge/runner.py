"""Execute one configured run and write all artifacts to a directory."""

from __future__ import annotations

import time
from pathlib import Path

from .config import build_dataset, build_federation_config
from .federation import RunTrace, run_federation
from .plots import render_metric_curves, render_weight_mass
from .report import build_report, metrics_csv_text, shuffle_table_document, write_json


def execute_run(resolved_config: dict, out_dir, render: bool = True) -> dict:
    """Run the configured experiment and write metrics.csv, report.json,
    weights.json / shuffle_table.json when applicable, and figures.

    Returns the report document.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset = build_dataset(resolved_config)
    fed_cfg = build_federation_config(resolved_config)
    trace = RunTrace()

    started = time.perf_counter()
    metrics = run_federation(fed_cfg, dataset, trace)
    wall = time.perf_counter() - started

    attack_name = resolved_config["attack"]["kind"]
    (out_dir / "metrics.csv").write_text(
        metrics_csv_text(
            metrics,
            resolved_config["scheme"],
            attack_name,
            resolved_config["defense"]["enabled"],
            fed_cfg.clients,
        )
    )
    report = build_report(resolved_config, metrics, trace, wall)
    write_json(out_dir / "report.json", report)
    if resolved_config["defense"]["enabled"]:
        write_json(out_dir / "weights.json", {"rounds": trace.weight_history})
    if trace.shuffle_table is not None:
        write_json(
            out_dir / "shuffle_table.json",
            shuffle_table_document(
                trace.shuffle_table,
                resolved_config["attack"]["eta"],
                resolved_config["attack"]["seed"],
            ),
        )
    if render and metrics:
        title = f"{resolved_config['scheme']}, attack={attack_name}"
        render_metric_curves(metrics, out_dir, title)
        if trace.weight_history:
            render_weight_mass(trace.weight_history, list(trace.malicious_ids), out_dir)
    return report
