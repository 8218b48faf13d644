"""Scores comparing explanation weights against simulation ground truth.

Time weights are binarized against a smoothed infection-count series and
scored with F1 (optionally after a running average) plus a Mann-Whitney U
test of near-event versus event-free weight values.  Node and edge weights
are scored with a rank-based AUC, and spatiotemporal weights with a
per-step Brier score.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MetricConfig",
    "smooth",
    "window_mean",
    "binarize_weights",
    "f1_score",
    "f1_threshold",
    "f1_window",
    "f1_baseline",
    "mann_whitney",
    "mw_sample_groups",
    "auc_score",
    "brier_series",
    "evaluate_graph",
    "aggregate_records",
]

DELTA_GRID = tuple(round(0.40 + 0.05 * k, 2) for k in range(12))  # 0.40 .. 0.95

# exact Mann-Whitney enumeration is capped at this many group assignments
_EXACT_ENUM_LIMIT = 2_000_000


@dataclass
class MetricConfig:
    smooth_width: int = 5
    threshold_rule: str = "fraction"  # "fraction" | "mu-sigma"
    delta: float = 0.4                # fraction of max, used by the "fraction" rule
    window: int = 6
    mw_halfwidth: int = 2
    seed: int = 0

    def validate(self) -> None:
        if self.smooth_width < 1 or self.smooth_width % 2 == 0:
            raise ValueError("smooth_width must be a positive odd integer")
        if self.threshold_rule not in ("fraction", "mu-sigma"):
            raise ValueError(f"unknown threshold rule '{self.threshold_rule}'")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.mw_halfwidth < 0:
            raise ValueError("mw_halfwidth must be >= 0")


def smooth(series: np.ndarray, width: int) -> np.ndarray:
    """Convolution with a normalized box kernel, zero padding at the edges."""
    if width < 1 or width % 2 == 0:
        raise ValueError("width must be a positive odd integer")
    series = np.asarray(series, dtype=np.float64)
    if width == 1:
        return series.copy()
    kernel = np.full(width, 1.0 / width)
    return np.convolve(series, kernel, mode="same")


def window_mean(series: np.ndarray, window: int) -> np.ndarray:
    """Running average normalized by the in-range window size, so constant
    inputs pass through unchanged."""
    if window < 1:
        raise ValueError("window must be >= 1")
    series = np.asarray(series, dtype=np.float64)
    if window == 1:
        return series.copy()
    kernel = np.ones(window)
    sums = np.convolve(series, kernel, mode="same")
    counts = np.convolve(np.ones_like(series), kernel, mode="same")
    return sums / counts


def binarize_weights(weights: np.ndarray, rule: str, delta: float = 0.4) -> np.ndarray:
    weights = np.asarray(weights, dtype=np.float64)
    if rule == "fraction":
        threshold = delta * weights.max() if weights.size else 0.0
    elif rule == "mu-sigma":
        threshold = weights.mean() + weights.std()
    else:
        raise ValueError(f"unknown threshold rule '{rule}'")
    return weights > threshold


def f1_score(pred: np.ndarray, truth: np.ndarray) -> float:
    pred = np.asarray(pred, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    if pred.shape != truth.shape:
        raise ValueError(f"prediction {pred.shape} vs truth {truth.shape}")
    tp = int((pred & truth).sum())
    fp = int((pred & ~truth).sum())
    fn = int((~pred & truth).sum())
    denom = 2 * tp + fp + fn
    return 2.0 * tp / denom if denom else 0.0


def truth_mask(m_t: np.ndarray, smooth_width: int) -> np.ndarray:
    """Positive steps of the smoothed infection-count series."""
    return smooth(m_t, smooth_width) > 0


def f1_threshold(w_t, truth, rule: str, delta: float = 0.4) -> float:
    return f1_score(binarize_weights(w_t, rule, delta), truth)


def f1_window(w_t, truth, window: int, rule: str, delta: float = 0.4) -> float:
    return f1_score(binarize_weights(window_mean(w_t, window), rule, delta), truth)


def f1_baseline(truth) -> float:
    """All-ones explainer: F1 = 2p / (1 + p) with p the positive rate."""
    truth = np.asarray(truth, dtype=bool)
    return f1_score(np.ones_like(truth, dtype=bool), truth)


def _rankdata(values: np.ndarray) -> np.ndarray:
    """Fractional ranks (ties get the mean of their rank range)."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _mw_exact_p(pooled_ranks: np.ndarray, n1: int, u_min_obs: float) -> float:
    n = pooled_ranks.size
    n2 = n - n1
    base = n1 * (n1 + 1) / 2.0
    count = 0
    total = 0
    for subset in itertools.combinations(range(n), n1):
        u1 = float(pooled_ranks[list(subset)].sum()) - base
        u2 = n1 * n2 - u1
        if min(u1, u2) <= u_min_obs + 1e-9:
            count += 1
        total += 1
    return min(1.0, count / total)


def _mw_normal_p(pooled: np.ndarray, n1: int, u_big: float) -> float:
    n = pooled.size
    n2 = n - n1
    _, tie_counts = np.unique(pooled, return_counts=True)
    tie_term = float((tie_counts.astype(np.float64) ** 3 - tie_counts).sum())
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if var <= 0:
        return 1.0
    z = (u_big - n1 * n2 / 2.0 - 0.5) / math.sqrt(var)
    return min(1.0, math.erfc(z / math.sqrt(2.0)))


def mann_whitney(x, y, method: str = "auto"):
    """Two-sided Mann-Whitney U test; returns (U of the first group, p).

    ``method`` is "exact" (enumeration of group assignments), "normal"
    (tie- and continuity-corrected approximation), or "auto", which uses
    the exact route only when the smaller group has fewer than 8 samples
    and the enumeration is tractable.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.size == 0 or y.size == 0:
        raise ValueError("mann_whitney requires two non-empty sample groups")
    n1, n2 = x.size, y.size
    pooled = np.concatenate([x, y])
    ranks = _rankdata(pooled)
    u1 = float(ranks[:n1].sum()) - n1 * (n1 + 1) / 2.0
    u2 = n1 * n2 - u1

    if method == "auto":
        small = min(n1, n2) < 8
        method = "exact" if small and math.comb(n1 + n2, n1) <= _EXACT_ENUM_LIMIT else "normal"
    if method == "exact":
        if math.comb(n1 + n2, n1) > _EXACT_ENUM_LIMIT:
            raise ValueError("exact enumeration infeasible for these group sizes")
        p = _mw_exact_p(ranks, n1, min(u1, u2))
    elif method == "normal":
        p = _mw_normal_p(pooled, n1, max(u1, u2))
    else:
        raise ValueError(f"unknown method '{method}'")
    return u1, p


def mw_sample_groups(w_t: np.ndarray, m_t: np.ndarray, halfwidth: int,
                     rng: np.random.Generator):
    """Weight values near ground-truth events vs in random event-free
    intervals of the same width (disjoint from the event neighbourhoods).

    Returns (near_values, random_values); the random group matches the near
    group size when enough event-free steps exist.
    """
    w_t = np.asarray(w_t, dtype=np.float64)
    m_t = np.asarray(m_t)
    steps = w_t.size
    events = np.flatnonzero(m_t > 0)
    near = np.zeros(steps, dtype=bool)
    for t in events:
        near[max(0, t - halfwidth):min(steps, t + halfwidth + 1)] = True
    near_values = w_t[near]
    width = 2 * halfwidth + 1
    free = ~near
    valid_centers = [c for c in range(halfwidth, steps - halfwidth)
                     if free[c - halfwidth:c + halfwidth + 1].all()]
    random_values = []
    if valid_centers and near_values.size:
        needed = int(math.ceil(near_values.size / width))
        for _ in range(needed):
            c = valid_centers[int(rng.integers(len(valid_centers)))]
            random_values.extend(w_t[c - halfwidth:c + halfwidth + 1])
        random_values = random_values[:near_values.size]
    elif free.any() and near_values.size:
        pool = np.flatnonzero(free)
        take = rng.choice(pool, size=min(near_values.size, pool.size), replace=True)
        random_values = list(w_t[take])
    return near_values, np.asarray(random_values, dtype=np.float64)


def auc_score(weights, mask) -> float:
    """Rank-based AUC with ties counted one half."""
    weights = np.asarray(weights, dtype=np.float64).ravel()
    mask = np.asarray(mask).ravel().astype(bool)
    if weights.size != mask.size:
        raise ValueError(f"{weights.size} weights vs {mask.size} mask entries")
    n_pos = int(mask.sum())
    n_neg = mask.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC undefined: mask contains a single class")
    ranks = _rankdata(weights)
    return float((ranks[mask].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def brier_series(w_st: np.ndarray, m_st: np.ndarray) -> np.ndarray:
    """Per-step mean squared difference between a [0,1] weight field and a
    binary mask; rows are time steps."""
    w_st = np.asarray(w_st, dtype=np.float64)
    m_st = np.asarray(m_st, dtype=np.float64)
    if w_st.shape != m_st.shape:
        raise ValueError(f"weights {w_st.shape} vs mask {m_st.shape}")
    return ((w_st - m_st) ** 2).mean(axis=1)


def _try_auc(weights, mask):
    try:
        return auc_score(weights, mask)
    except ValueError:
        return None


def evaluate_graph(gt, w_t, w_s_global, w_s_node, w_g, edge_w2: dict, edge_w3: dict,
                   union_edges, cfg: MetricConfig) -> dict:
    """Score one class-1 graph; metrics undefined on this graph are None."""
    cfg.validate()
    truth = truth_mask(gt.m_t, cfg.smooth_width)
    record = {
        "f1_threshold": f1_threshold(w_t, truth, cfg.threshold_rule, cfg.delta),
        "f1_window": f1_window(w_t, truth, cfg.window, cfg.threshold_rule, cfg.delta),
        "f1_baseline": f1_baseline(truth),
    }
    record["auc_tg"] = _try_auc(w_s_global, gt.m_s)
    record["auc_node"] = _try_auc(w_s_node, gt.m_s)

    truth_edges = {tuple(e) for e in gt.m_e}
    edge_mask = [1 if tuple(e) in truth_edges else 0 for e in union_edges]
    for name, wmap in (("auc_edge2", edge_w2), ("auc_edge3", edge_w3)):
        vec = [wmap.get(tuple(e), 0.0) for e in union_edges]
        record[name] = _try_auc(vec, edge_mask) if union_edges else None

    w_g = np.asarray(w_g, dtype=np.float64)
    peak = w_g.max()
    record["brier_mean"] = float(brier_series(w_g / peak if peak > 0 else w_g,
                                              gt.m_st).mean())
    return record


def aggregate_records(records, keys=None):
    """Mean/std/count per metric over the defined per-graph values."""
    if not records:
        raise ValueError("no class-1 graphs to aggregate")
    if keys is None:
        keys = sorted({k for r in records for k in r})
    table = {}
    for key in keys:
        vals = [r[key] for r in records if r.get(key) is not None]
        if vals:
            arr = np.asarray(vals, dtype=np.float64)
            table[key] = {"mean": float(arr.mean()), "std": float(arr.std()),
                          "count": len(vals)}
        else:
            table[key] = {"mean": float("nan"), "std": float("nan"), "count": 0}
    return table
