"""Command line interface.

Subcommands: `run` executes an experiment from a JSON config and writes
artifacts; `shuffle-table` builds and prints the attacker's table;
`score` compares two logit CSV files; `partition` previews a data split.
Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import build_dataset, build_federation_config, load_config
from .data import read_logit_csv
from .errors import ConfigError, LogitForgeError
from .federation import partition
from .logits import score_s1, score_s2
from .report import shuffle_table_document
from .runner import execute_run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="logitforge",
        description="Deterministic logit-poisoning and robust-aggregation simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a federation experiment")
    run.add_argument("config", help="path to the JSON run configuration")
    run.add_argument("--out", default=None, help="output directory (default runs/<config stem>)")
    run.add_argument("--no-plots", action="store_true", help="skip figure rendering")

    table = sub.add_parser("shuffle-table", help="build and print a shuffle table")
    table.add_argument("config", help="path to the JSON run configuration")

    score = sub.add_parser("score", help="mean poisoning scores between two logit CSVs")
    score.add_argument("--original", required=True)
    score.add_argument("--poisoned", required=True)

    preview = sub.add_parser("partition", help="preview the configured data split")
    preview.add_argument("config", help="path to the JSON run configuration")
    return parser


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    out_dir = args.out or str(Path("runs") / Path(args.config).stem)
    execute_run(cfg, out_dir, render=not args.no_plots)
    print(f"run complete: artifacts in {out_dir}")
    return EXIT_OK


def _cmd_shuffle_table(args) -> int:
    from .federation import _prepare_shuffle_table

    cfg = load_config(args.config)
    if cfg["attack"]["kind"] != "logit_shuffle":
        raise ConfigError("'attack.kind': shuffle-table requires 'logit_shuffle'")
    dataset = build_dataset(cfg)
    fed_cfg = build_federation_config(cfg)
    _, public, _ = partition(
        dataset, fed_cfg.clients, fed_cfg.public_size, fed_cfg.test_size, fed_cfg.seed
    )
    table = _prepare_shuffle_table(fed_cfg, public)
    document = shuffle_table_document(table, cfg["attack"]["eta"], cfg["attack"]["seed"])
    print(json.dumps(document, indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_score(args) -> int:
    original = read_logit_csv(args.original)
    poisoned = read_logit_csv(args.poisoned)
    if original.rows.shape != poisoned.rows.shape:
        raise ConfigError("original and poisoned files must have matching shapes")
    s1_values = []
    s2_values = []
    for i in range(original.sample_count):
        s1_values.append(score_s1(original.vector(i), poisoned.vector(i)))
        s2_values.append(score_s2(original.vector(i), poisoned.vector(i)))
    print(f"S1 {float(np.mean(s1_values))!r}")
    print(f"S2 {float(np.mean(s2_values))!r}")
    return EXIT_OK


def _cmd_partition(args) -> int:
    cfg = load_config(args.config)
    dataset = build_dataset(cfg)
    fed_cfg = build_federation_config(cfg)
    shards, public, test = partition(
        dataset, fed_cfg.clients, fed_cfg.public_size, fed_cfg.test_size, fed_cfg.seed
    )
    dropped = dataset.sample_count - public.sample_count - test.sample_count - sum(
        s.sample_count for s in shards
    )
    print(f"total {dataset.sample_count}")
    print(f"public {public.sample_count}")
    print(f"test {test.sample_count}")
    print(f"clients {len(shards)}")
    print(f"shard_size {shards[0].sample_count}")
    print(f"dropped {dropped}")
    return EXIT_OK


_COMMANDS = {
    "run": _cmd_run,
    "shuffle-table": _cmd_shuffle_table,
    "score": _cmd_score,
    "partition": _cmd_partition,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LogitForgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
