"""Experiment configuration: a flat key-value text file with dotted keys.

Lines look like ``model.beta = 0.05``; ``#`` starts a comment and commas
make a value a candidate list (only the grid command accepts those).
Defaults follow the selected hyperparameters of the mid-size contact
dataset; values outside the documented candidate grid raise a warning,
not an error.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass

from .data import GeneratorConfig
from .metrics import MetricConfig

__all__ = ["ConfigError", "ModelConfig", "ExperimentConfig", "load_config",
           "parse_config_file", "stage_hashes", "DEFAULTS", "GRID_CANDIDATES"]


class ConfigError(ValueError):
    """Invalid configuration file or values."""


@dataclass
class ModelConfig:
    """Classifier architecture and training settings.

    Defined here rather than next to the model so that the evaluate stage,
    which only consumes dumped files, never has to import model code.
    """

    hidden: int = 16          # F
    layers: int = 9           # L
    mlp_layers: int = 3
    alpha: float = 1.0
    beta: float = 0.05
    koopman_decay: float = 1e-4
    lr: float = 0.01
    epochs: int = 30
    batch: int = 16
    val_fraction: float = 0.2
    seed: int = 0

    def validate(self) -> None:
        if self.hidden < 1 or self.layers < 1 or not (1 <= self.mlp_layers <= 3):
            raise ValueError("hidden/layers must be >= 1 and mlp_layers in 1..3")
        if self.batch < 1 or self.epochs < 0:
            raise ValueError("batch must be >= 1 and epochs >= 0")


DEFAULTS = {
    "seed": 0,
    "generator.num_graphs": 200,
    "generator.nodes_min": 50,
    "generator.nodes_max": 50,
    "generator.horizon": 50,
    "generator.density": 0.35,
    "generator.activation": 0.6,
    "generator.p_inf": 0.3,
    "generator.num_seeds": 1,
    "generator.num_components": 3,
    "model.hidden": 16,
    "model.layers": 9,
    "model.mlp_layers": 3,
    "model.alpha": 1.0,
    "model.beta": 0.05,
    "model.koopman_decay": 1e-4,
    "model.lr": 0.01,
    "model.epochs": 30,
    "model.batch": 16,
    "model.val_fraction": 0.2,
    "reduction.method": "pca",
    "reduction.dim": 16,
    "dmd.gamma": 1e-6,
    "dmd.mode": 1,
    "sindy.degree": 3,
    "sindy.eta": 0.05,
    "metrics.smooth_width": 5,
    "metrics.threshold_rule": "fraction",
    "metrics.delta": 0.4,
    "metrics.window": 6,
    "metrics.mw_halfwidth": 2,
    "report.max_graphs": 5,
}

GRID_CANDIDATES = {
    "model.hidden": [16, 32, 64],
    "model.layers": list(range(1, 11)),
    "model.mlp_layers": [1, 2, 3],
    "model.alpha": [1.0],
    "model.beta": [0.0, 0.05, 0.1, 0.5, 1.0],
    "model.batch": [16, 32, 64, 128, 256],
    "reduction.method": ["pca", "svd"],
    "reduction.dim": [10, 16, 32, 64],
    "dmd.mode": [0, 1, "auto"],
    "sindy.eta": [0.01, 0.02, 0.05, 0.1, 0.2],
    "metrics.delta": [round(0.40 + 0.05 * k, 2) for k in range(12)],
    "metrics.window": [2, 3, 4, 5, 6],
}

_SEEDED_SECTIONS = ("generator.seed", "model.seed", "metrics.seed")


def _parse_scalar(raw: str):
    raw = raw.strip()
    if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "'\"":
        return raw[1:-1]
    low = raw.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw


def _parse_value(raw: str):
    if "," in raw:
        return [_parse_scalar(part) for part in raw.split(",")]
    return _parse_scalar(raw)


def parse_config_file(path) -> dict:
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            key, sep, raw = body.partition("=")
            if not sep:
                raise ConfigError(f"{path}: line {line_no}: expected 'key = value'")
            values[key.strip()] = _parse_value(raw)
    return values


class ExperimentConfig:
    """Resolved flat configuration with typed section views."""

    def __init__(self, flat: dict):
        self.flat = flat

    def __getitem__(self, key):
        return self.flat[key]

    def has_lists(self) -> bool:
        return any(isinstance(v, list) for v in self.flat.values())

    def list_keys(self) -> list:
        return sorted(k for k, v in self.flat.items() if isinstance(v, list))

    def generator(self) -> GeneratorConfig:
        f = self.flat
        return GeneratorConfig(
            num_graphs=f["generator.num_graphs"],
            nodes_min=f["generator.nodes_min"], nodes_max=f["generator.nodes_max"],
            horizon=f["generator.horizon"], density=f["generator.density"],
            activation=f["generator.activation"], p_inf=f["generator.p_inf"],
            num_seeds=f["generator.num_seeds"],
            num_components=f["generator.num_components"],
            seed=f.get("generator.seed", f["seed"]),
        )

    def model(self) -> ModelConfig:
        f = self.flat
        return ModelConfig(
            hidden=f["model.hidden"], layers=f["model.layers"],
            mlp_layers=f["model.mlp_layers"], alpha=f["model.alpha"],
            beta=f["model.beta"], koopman_decay=f["model.koopman_decay"],
            lr=f["model.lr"], epochs=f["model.epochs"], batch=f["model.batch"],
            val_fraction=f["model.val_fraction"],
            seed=f.get("model.seed", f["seed"]),
        )

    def metric(self) -> MetricConfig:
        f = self.flat
        return MetricConfig(
            smooth_width=f["metrics.smooth_width"],
            threshold_rule=f["metrics.threshold_rule"], delta=f["metrics.delta"],
            window=f["metrics.window"], mw_halfwidth=f["metrics.mw_halfwidth"],
            seed=f.get("metrics.seed", f["seed"]),
        )


def load_config(path=None, overrides: dict | None = None,
                allow_lists: bool = False) -> ExperimentConfig:
    flat = dict(DEFAULTS)
    if path is not None:
        flat.update(parse_config_file(path))
    if overrides:
        flat.update(overrides)

    known = set(DEFAULTS) | set(_SEEDED_SECTIONS)
    unknown = sorted(set(flat) - known)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")

    for key, value in flat.items():
        if isinstance(value, list):
            if not allow_lists:
                raise ConfigError(f"{key} holds a candidate list; only `tgx grid` "
                                  "accepts lists")
            if key.startswith(("generator.", "seed", "report.")):
                raise ConfigError(f"{key}: candidate lists are not searchable")

    for key, candidates in GRID_CANDIDATES.items():
        value = flat.get(key)
        values = value if isinstance(value, list) else [value]
        for v in values:
            if v not in candidates:
                warnings.warn(f"{key}={v} is outside the documented candidate grid")

    cfg = ExperimentConfig(flat)
    try:
        if not any(isinstance(flat[k], list) for k in flat if k.startswith("generator.")):
            cfg.generator().validate()
        if not any(isinstance(flat[k], list) for k in flat if k.startswith(("model.",))):
            cfg.model().validate()
        if not any(isinstance(flat[k], list) for k in flat if k.startswith("metrics.")):
            cfg.metric().validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    mode = flat["dmd.mode"]
    for m in (mode if isinstance(mode, list) else [mode]):
        if m not in (0, 1, "auto"):
            raise ConfigError(f"dmd.mode must be 0, 1 or 'auto', got {m!r}")
    if flat["sindy.degree"] not in (2, 3):
        raise ConfigError("sindy.degree must be 2 or 3")
    return cfg


def _digest(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _section(flat: dict, prefix: str) -> dict:
    return {k: v for k, v in flat.items() if k.startswith(prefix)}


def stage_hashes(cfg: ExperimentConfig) -> dict:
    """Chained per-stage configuration hashes used for staleness checks."""
    flat = cfg.flat
    gen = _digest({**_section(flat, "generator."), "seed": flat["seed"]})
    train = _digest({"parent": gen, **_section(flat, "model.")})
    explain = _digest({"parent": train, **_section(flat, "reduction."),
                       "dmd.gamma": flat["dmd.gamma"], **_section(flat, "sindy.")})
    evaluate = _digest({"parent": explain, **_section(flat, "metrics."),
                        "dmd.mode": flat["dmd.mode"]})
    return {"generate": gen, "train": train, "explain": explain, "evaluate": evaluate}
