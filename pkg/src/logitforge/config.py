"""Run configuration: one JSON document, fully defaulted and validated.

Unknown keys are rejected by name so typos fail fast, and the resolved
document (every default filled in) is echoed into the run report to keep
runs reproducible from their artifacts alone.
"""

from __future__ import annotations

import copy
import json

import numpy as np

from .attack import AttackConfig, AttackKind
from .data import Dataset, gen_synthetic, load_idx
from .errors import ConfigError
from .federation import FederationConfig, Scheme, child_seed

# Per-scheme defaults for the knobs the schemes disagree on.
_SCHEME_DEFAULTS = {
    "fedmd": {"epochs_local": 1, "epochs_transfer": 3, "epochs_server": 1,
              "lr_local": 2e-6, "lr_transfer": 1e-5, "lr_server": 1e-5},
    "dsfl": {"epochs_local": 2, "epochs_transfer": 2, "epochs_server": 1,
             "lr_local": 2e-6, "lr_transfer": 1e-5, "lr_server": 1e-5},
    "feddf": {"epochs_local": 2, "epochs_transfer": 3, "epochs_server": 3,
              "lr_local": 5e-6, "lr_transfer": 1e-5, "lr_server": 1e-5},
}

_DEFAULTS = {
    "scheme": "fedmd",
    "clients": 10,
    "attacker_fraction": 0.0,
    "rounds": 10,
    "seed": 0,
    "attacker_epochs": 20,
    "attack": {
        "kind": "none",
        "eta": 2.0,
        "shuffle_rounds": 500,
        "magnitude": None,
        "seed": 0,
    },
    "defense": {"enabled": False, "temperature": 0.5, "clusters": 2},
    "era": {"temperature": 0.1},
    "data": {
        "source": "synthetic",
        "paths": {"images": None, "labels": None},
        "size": None,
        "synthetic": {"classes": 10, "per_class": 1000, "features": 784, "spread": 0.3},
    },
    "split": {"public": 1500, "test": 1000},
    "model": {
        "hidden": 64,
        "epochs_local": None,
        "epochs_transfer": None,
        "epochs_server": None,
        "lr_local": None,
        "lr_transfer": None,
        "lr_server": None,
        "batch_size": 32,
    },
}

_ATTACK_KINDS = {"none", "logit_shuffle", "label_flip", "naive"}
_SCHEMES = {"fedmd", "dsfl", "feddf"}
_SOURCES = {"mnist", "synthetic"}


def _merge(defaults: dict, overrides, path: str) -> dict:
    if not isinstance(overrides, dict):
        raise ConfigError(f"'{path}' must be an object")
    merged = copy.deepcopy(defaults)
    for key, value in overrides.items():
        here = f"{path}.{key}" if path else key
        if key not in defaults:
            raise ConfigError(f"unknown config key '{here}'")
        if isinstance(defaults[key], dict):
            merged[key] = _merge(defaults[key], value, here)
        else:
            merged[key] = value
    return merged


def _require(condition: bool, key: str, message: str):
    if not condition:
        raise ConfigError(f"'{key}': {message}")


def _check_number(cfg, key_path, kind=float, minimum=None, strict=False, allow_none=False):
    node = cfg
    for part in key_path.split(".")[:-1]:
        node = node[part]
    value = node[key_path.split(".")[-1]]
    if value is None:
        _require(allow_none, key_path, "must not be null")
        return
    _require(isinstance(value, (int, float)) and not isinstance(value, bool), key_path, "must be a number")
    if kind is int:
        _require(float(value).is_integer(), key_path, "must be an integer")
    if minimum is not None:
        if strict:
            _require(value > minimum, key_path, f"must be > {minimum}")
        else:
            _require(value >= minimum, key_path, f"must be >= {minimum}")


def load_config(path) -> dict:
    """Read a JSON config file and resolve it against all defaults."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return resolve_config(raw)


def resolve_config(raw: dict) -> dict:
    """Fill defaults, validate every key, and return the resolved document."""
    cfg = _merge(_DEFAULTS, raw, "")

    _require(cfg["scheme"] in _SCHEMES, "scheme", f"must be one of {sorted(_SCHEMES)}")
    _check_number(cfg, "clients", int, minimum=1)
    _check_number(cfg, "attacker_fraction", float, minimum=0.0)
    _require(cfg["attacker_fraction"] < 0.5, "attacker_fraction", "must be < 0.5")
    _check_number(cfg, "rounds", int, minimum=0)
    _check_number(cfg, "seed", int)
    _check_number(cfg, "attacker_epochs", int, minimum=1)

    _require(cfg["attack"]["kind"] in _ATTACK_KINDS, "attack.kind",
             f"must be one of {sorted(_ATTACK_KINDS)}")
    _check_number(cfg, "attack.eta", float, minimum=0.0, strict=True)
    _check_number(cfg, "attack.shuffle_rounds", int, minimum=1)
    _check_number(cfg, "attack.magnitude", float, minimum=0.0, strict=True, allow_none=True)
    _check_number(cfg, "attack.seed", int)

    _require(isinstance(cfg["defense"]["enabled"], bool), "defense.enabled", "must be a boolean")
    _check_number(cfg, "defense.temperature", float, minimum=0.0, strict=True)
    _check_number(cfg, "defense.clusters", int, minimum=1)
    _check_number(cfg, "era.temperature", float, minimum=0.0, strict=True)

    _require(cfg["data"]["source"] in _SOURCES, "data.source", f"must be one of {sorted(_SOURCES)}")
    if cfg["data"]["source"] == "mnist":
        for side in ("images", "labels"):
            _require(
                isinstance(cfg["data"]["paths"][side], str),
                f"data.paths.{side}",
                "must be a file path for the mnist source",
            )
    _check_number(cfg, "data.size", int, minimum=1, allow_none=True)
    _check_number(cfg, "data.synthetic.classes", int, minimum=2)
    _check_number(cfg, "data.synthetic.per_class", int, minimum=1)
    _check_number(cfg, "data.synthetic.features", int, minimum=1)
    _check_number(cfg, "data.synthetic.spread", float, minimum=0.0)
    _check_number(cfg, "split.public", int, minimum=1)
    _check_number(cfg, "split.test", int, minimum=1)

    scheme_fill = _SCHEME_DEFAULTS[cfg["scheme"]]
    for key, fallback in scheme_fill.items():
        if cfg["model"][key] is None:
            cfg["model"][key] = fallback
    _check_number(cfg, "model.hidden", int, minimum=1)
    for key in ("epochs_local", "epochs_transfer", "epochs_server"):
        _check_number(cfg, f"model.{key}", int, minimum=1)
    for key in ("lr_local", "lr_transfer", "lr_server"):
        _check_number(cfg, f"model.{key}", float, minimum=0.0, strict=True)
    _check_number(cfg, "model.batch_size", int, minimum=1)
    return cfg


def build_dataset(cfg: dict) -> Dataset:
    """Materialize the configured dataset (seeded synthetic or IDX files)."""
    data = cfg["data"]
    if data["source"] == "synthetic":
        synth = data["synthetic"]
        dataset = gen_synthetic(
            int(synth["classes"]),
            int(synth["per_class"]),
            int(synth["features"]),
            float(synth["spread"]),
            child_seed(cfg["seed"], "data"),
        )
    else:
        dataset = load_idx(data["paths"]["images"], data["paths"]["labels"])
    size = data["size"]
    if size is not None:
        size = int(size)
        if size < dataset.sample_count:
            rng = np.random.default_rng([child_seed(cfg["seed"], "subsample"), 0x512E])
            order = rng.permutation(dataset.sample_count)[:size]
            dataset = dataset.subset(order)
    return dataset


def build_federation_config(cfg: dict) -> FederationConfig:
    """Translate the resolved document into the federation runtime config."""
    attack = None
    if cfg["attack"]["kind"] != "none":
        attack = AttackConfig(
            kind=AttackKind(cfg["attack"]["kind"]),
            scaling_factor=float(cfg["attack"]["eta"]),
            naive_magnitude=(
                float(cfg["attack"]["magnitude"])
                if cfg["attack"]["magnitude"] is not None
                else None
            ),
            shuffle_rounds=int(cfg["attack"]["shuffle_rounds"]),
            seed=int(cfg["attack"]["seed"]),
        )
    model = cfg["model"]
    try:
        return FederationConfig(
            scheme=Scheme(cfg["scheme"]),
            clients=int(cfg["clients"]),
            attacker_fraction=float(cfg["attacker_fraction"]),
            rounds=int(cfg["rounds"]),
            public_size=int(cfg["split"]["public"]),
            test_size=int(cfg["split"]["test"]),
            attack=attack,
            defense_enabled=bool(cfg["defense"]["enabled"]),
            defense_temperature=float(cfg["defense"]["temperature"]),
            defense_clusters=int(cfg["defense"]["clusters"]),
            era_temperature=float(cfg["era"]["temperature"]),
            hidden_units=int(model["hidden"]),
            epochs_local=int(model["epochs_local"]),
            epochs_transfer=int(model["epochs_transfer"]),
            epochs_server=int(model["epochs_server"]),
            lr_local=float(model["lr_local"]),
            lr_transfer=float(model["lr_transfer"]),
            lr_server=float(model["lr_server"]),
            batch_size=int(model["batch_size"]),
            attacker_epochs=int(cfg["attacker_epochs"]),
            seed=int(cfg["seed"]),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
