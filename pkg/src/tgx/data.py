"""Temporal-graph data model, dissemination simulation, and dataset I/O.

A dataset is a balanced collection of temporal graphs: class-1 graphs carry
a susceptible-infected process on a synthetic contact network, class-0
graphs are the same graphs with the infected labels shuffled across nodes
at every step.  Ground-truth masks record when and where infections happen
so explanation weights can be scored against them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ConfigurationError",
    "DatasetFormatError",
    "TemporalGraph",
    "GroundTruth",
    "GeneratorConfig",
    "generate_contact_network",
    "simulate_si",
    "shuffle_negative",
    "extract_ground_truth",
    "infection_count_series",
    "generate_dataset",
    "write_dataset",
    "read_dataset",
]


class ConfigurationError(ValueError):
    """Invalid generator or experiment configuration."""


class DatasetFormatError(ValueError):
    """Malformed dataset file; the message names the line and field."""


@dataclass
class TemporalGraph:
    """A sequence of edge sets over a fixed node universe with binary features."""

    num_nodes: int
    edges: list  # per step: sorted list of (u, v) with u < v
    features: np.ndarray  # (T, N) uint8, x[t, n] in {0, 1}
    label: int
    id: str

    @property
    def horizon(self) -> int:
        return self.features.shape[0]

    def union_edges(self) -> list:
        """All edges present at any time, sorted."""
        return sorted({e for step in self.edges for e in step})

    def validate(self) -> None:
        feats = np.asarray(self.features)
        if feats.shape != (len(self.edges), self.num_nodes):
            raise ValueError(f"{self.id}: features shape {feats.shape} does not match "
                             f"T={len(self.edges)}, N={self.num_nodes}")
        if not np.isin(feats, (0, 1)).all():
            raise ValueError(f"{self.id}: features must be 0/1")
        for t, step in enumerate(self.edges):
            for (u, v) in step:
                if u == v:
                    raise ValueError(f"{self.id}: self-loop ({u},{v}) at step {t}")
                if not (0 <= u < self.num_nodes and 0 <= v < self.num_nodes):
                    raise ValueError(f"{self.id}: edge ({u},{v}) out of range at step {t}")


@dataclass
class GroundTruth:
    """Simulation ground truth used to score explanations."""

    m_t: np.ndarray  # (T-1,) infections per transition t -> t+1
    m_s: np.ndarray  # (N,) ever-infected node mask
    m_e: list  # infection-transmitting edges, sorted list of (u, v)
    m_st: np.ndarray  # (T, N) infected-at-time mask


@dataclass
class GeneratorConfig:
    """Synthetic dissemination dataset parameters.

    The contact model is a fixed base graph with i.i.d. per-step edge
    activation.  The base graph is a union of ``num_components`` disjoint
    Erdos-Renyi blocks: with a single dense block the infection saturates
    every node within the horizon, which leaves no negative class for the
    node ground truth, so the default keeps dissemination confined to the
    seed's component the way the real contact networks do.
    """

    num_graphs: int = 200
    nodes_min: int = 50
    nodes_max: int = 50
    horizon: int = 50
    density: float = 0.35
    activation: float = 0.6
    p_inf: float = 0.3
    num_seeds: int = 1
    num_components: int = 3
    seed: int = 0

    def validate(self) -> None:
        if self.num_graphs <= 0 or self.num_graphs % 2:
            raise ConfigurationError("num_graphs must be positive and even (balanced classes)")
        if not (25 <= self.nodes_min <= self.nodes_max <= 100):
            raise ConfigurationError("node range must lie within [25, 100]")
        if not (48 <= self.horizon <= 205):
            raise ConfigurationError("horizon must lie within [48, 205]")
        for name in ("density", "activation", "p_inf"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ConfigurationError(f"{name}={v} outside [0, 1]")
        if self.num_seeds < 1:
            raise ConfigurationError("need at least one initially infected node")
        if self.num_components < 1 or self.num_components > self.nodes_min:
            raise ConfigurationError("num_components must be in [1, nodes_min]")


def generate_contact_network(cfg: GeneratorConfig, rng: np.random.Generator,
                             num_nodes: int | None = None) -> list:
    """Sample per-step edge sets: a fixed random base graph, each edge
    independently active at each step with probability ``cfg.activation``."""
    if num_nodes is None:
        num_nodes = int(rng.integers(cfg.nodes_min, cfg.nodes_max + 1))
    if num_nodes <= 0:
        raise ConfigurationError("zero nodes")

    # block membership: near-equal contiguous components
    bounds = np.linspace(0, num_nodes, cfg.num_components + 1).astype(int)
    base = []
    for b in range(cfg.num_components):
        lo, hi = bounds[b], bounds[b + 1]
        for u in range(lo, hi):
            for v in range(u + 1, hi):
                if rng.random() < cfg.density:
                    base.append((u, v))
    if not base:
        raise ConfigurationError("empty base graph; increase density or node count")
    base.sort()

    steps = []
    for _ in range(cfg.horizon):
        active = [e for e in base if rng.random() < cfg.activation]
        steps.append(active)
    return steps


def _neighbor_lists(step_edges, num_nodes):
    nbrs = [[] for _ in range(num_nodes)]
    for (u, v) in step_edges:
        nbrs[u].append(v)
        nbrs[v].append(u)
    return nbrs


def simulate_si(edges: list, num_nodes: int, p_inf: float, seeds,
                rng: np.random.Generator):
    """Run a susceptible-infected process over the given edge sets.

    Each step, every infected node transmits over each active incident edge
    independently with probability ``p_inf``; a susceptible node becomes
    infected if any contact fires, and the edge credited with its infection
    is chosen uniformly among the contacts that fired.  Returns the binary
    feature matrix and the ground truth extracted from the run.
    """
    seeds = sorted(int(s) for s in np.atleast_1d(seeds))
    if not seeds:
        raise ValueError("at least one seed node required")
    for s in seeds:
        if not (0 <= s < num_nodes):
            raise ValueError(f"seed {s} out of range for {num_nodes} nodes")
    if not (0.0 <= p_inf <= 1.0):
        raise ValueError(f"p_inf={p_inf} outside [0, 1]")

    horizon = len(edges)
    x = np.zeros((horizon, num_nodes), dtype=np.uint8)
    x[0, seeds] = 1
    transmitting = set()

    for t in range(horizon - 1):
        x[t + 1] = x[t]
        nbrs = _neighbor_lists(edges[t], num_nodes)
        for n in range(num_nodes):
            if x[t, n]:
                continue
            fired = [m for m in sorted(nbrs[n]) if x[t, m] and rng.random() < p_inf]
            if fired:
                x[t + 1, n] = 1
                m = fired[int(rng.integers(len(fired)))]
                transmitting.add((min(n, m), max(n, m)))

    gt = GroundTruth(
        m_t=infection_count_series(x, edges),
        m_s=x.any(axis=0).astype(np.uint8),
        m_e=sorted(transmitting),
        m_st=x.copy(),
    )
    return x, gt


def infection_count_series(features: np.ndarray, edges: list) -> np.ndarray:
    """Per-transition count of adjacent pairs going from not-both-infected
    to both-infected: entry t covers the transition t -> t+1."""
    horizon = features.shape[0]
    m_t = np.zeros(horizon - 1, dtype=np.int64)
    for t in range(horizon - 1):
        count = 0
        for (u, v) in edges[t]:
            if features[t, u] * features[t, v] == 0 and features[t + 1, u] * features[t + 1, v] == 1:
                count += 1
        m_t[t] = count
    return m_t


def extract_ground_truth(features: np.ndarray, edges: list,
                         rng: np.random.Generator | None = None) -> GroundTruth:
    """Recompute ground truth from features and edges alone.

    The transmitting edge of a node's first infection is not identifiable
    from the features when several infected neighbors were adjacent, so one
    candidate is chosen uniformly (or the lowest-index one without an rng).
    Nodes that turn infected with no infected neighbor contribute no edge.
    """
    features = np.asarray(features)
    horizon, num_nodes = features.shape
    transmitting = set()
    for n in range(num_nodes):
        times = np.flatnonzero(features[:, n])
        if times.size == 0 or times[0] == 0:
            continue
        t0 = int(times[0])
        nbrs = _neighbor_lists(edges[t0 - 1], num_nodes)
        candidates = sorted(m for m in nbrs[n] if features[t0 - 1, m])
        if not candidates:
            continue
        m = candidates[0] if rng is None else candidates[int(rng.integers(len(candidates)))]
        transmitting.add((min(n, m), max(n, m)))
    return GroundTruth(
        m_t=infection_count_series(features, edges),
        m_s=features.any(axis=0).astype(np.uint8),
        m_e=sorted(transmitting),
        m_st=features.astype(np.uint8).copy(),
    )


def shuffle_negative(tg: TemporalGraph, rng: np.random.Generator) -> TemporalGraph:
    """Class-0 twin: same topology, infected labels redistributed by a fresh
    uniform permutation of the node indices at every step."""
    if tg.label != 1:
        raise ValueError("shuffle_negative expects a class-1 graph")
    feats = np.empty_like(tg.features)
    for t in range(tg.horizon):
        perm = rng.permutation(tg.num_nodes)
        feats[t] = tg.features[t][perm]
    return TemporalGraph(
        num_nodes=tg.num_nodes,
        edges=[list(step) for step in tg.edges],
        features=feats,
        label=0,
        id=tg.id[:-1] + "n" if tg.id.endswith("p") else tg.id + "_neg",
    )


def generate_dataset(cfg: GeneratorConfig) -> list:
    """Balanced dataset of (TemporalGraph, GroundTruth) pairs, deterministic
    in ``cfg.seed``.  Each class-1 graph is followed by its shuffled twin."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    items = []
    for i in range(cfg.num_graphs // 2):
        num_nodes = int(rng.integers(cfg.nodes_min, cfg.nodes_max + 1))
        edges = generate_contact_network(cfg, rng, num_nodes)
        seeds = rng.choice(num_nodes, size=cfg.num_seeds, replace=False)
        feats, gt = simulate_si(edges, num_nodes, cfg.p_inf, seeds, rng)
        pos = TemporalGraph(num_nodes, edges, feats, 1, f"g{i:04d}p")
        neg = shuffle_negative(pos, rng)
        neg_gt = extract_ground_truth(neg.features, neg.edges, rng)
        items.append((pos, gt))
        items.append((neg, neg_gt))
    return items


# ---------------------------------------------------------------------------
# dataset file format: UTF-8 JSON lines, one temporal graph per record


def _record_from(tg: TemporalGraph, gt: GroundTruth) -> dict:
    return {
        "id": tg.id,
        "num_nodes": int(tg.num_nodes),
        "T": int(tg.horizon),
        "label": int(tg.label),
        "edges": [[[int(u), int(v)] for (u, v) in step] for step in tg.edges],
        "features": tg.features.astype(int).tolist(),
        "ground_truth": {
            "m_t": gt.m_t.astype(int).tolist(),
            "m_s": gt.m_s.astype(int).tolist(),
            "m_e": [[int(u), int(v)] for (u, v) in gt.m_e],
            "m_st": gt.m_st.astype(int).tolist(),
        },
    }


_REQUIRED_FIELDS = ("id", "num_nodes", "T", "label", "edges", "features", "ground_truth")
_GT_FIELDS = ("m_t", "m_s", "m_e", "m_st")


def _parse_record(obj: dict, line_no: int):
    for f in _REQUIRED_FIELDS:
        if f not in obj:
            raise DatasetFormatError(f"line {line_no}: missing field '{f}'")
    gt_obj = obj["ground_truth"]
    for f in _GT_FIELDS:
        if f not in gt_obj:
            raise DatasetFormatError(f"line {line_no}: missing field 'ground_truth.{f}'")
    try:
        tg = TemporalGraph(
            num_nodes=int(obj["num_nodes"]),
            edges=[[(int(u), int(v)) for (u, v) in step] for step in obj["edges"]],
            features=np.asarray(obj["features"], dtype=np.uint8),
            label=int(obj["label"]),
            id=str(obj["id"]),
        )
        gt = GroundTruth(
            m_t=np.asarray(gt_obj["m_t"], dtype=np.int64),
            m_s=np.asarray(gt_obj["m_s"], dtype=np.uint8),
            m_e=[(int(u), int(v)) for (u, v) in gt_obj["m_e"]],
            m_st=np.asarray(gt_obj["m_st"], dtype=np.uint8),
        )
    except (TypeError, ValueError) as exc:
        raise DatasetFormatError(f"line {line_no}: {exc}") from exc
    if tg.horizon != int(obj["T"]):
        raise DatasetFormatError(f"line {line_no}: field 'T'={obj['T']} does not match "
                                 f"{tg.horizon} feature rows")
    try:
        tg.validate()
    except ValueError as exc:
        raise DatasetFormatError(f"line {line_no}: {exc}") from exc
    return tg, gt


def write_dataset(path, items) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for tg, gt in items:
            fh.write(json.dumps(_record_from(tg, gt), separators=(",", ":")) + "\n")


def read_dataset(path) -> list:
    items = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(f"line {line_no}: invalid JSON ({exc.msg})") from exc
            items.append(_parse_record(obj, line_no))
    return items
