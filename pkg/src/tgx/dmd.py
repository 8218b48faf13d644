"""Ridge-regression dynamic mode decomposition over embedding trajectories.

A linear one-step operator is fit on snapshot pairs, either globally over
the pooled states of many graphs or per graph over its node states.  The
operator's eigenvectors turn trajectories into complex mode series whose
forward differences and per-node deviations provide the explanation
weights for time steps, nodes, and (time, node) cells.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DmdFit",
    "ridge_operator",
    "snapshot_pairs",
    "fit_dmd_global",
    "fit_dmd_node",
    "eig_sorted",
    "mode_series",
    "time_weight",
    "node_weight",
    "spatiotemporal_weight",
]


@dataclass
class DmdFit:
    operator: np.ndarray      # (f, f) real
    eigenvalues: np.ndarray   # (f,) complex, decreasing |lambda|
    eigenvectors: np.ndarray  # (f, f) complex, columns, unit norm
    gamma: float
    scope: str                # "global" | "per-graph"
    pinv_fallback: bool = False


def snapshot_pairs(trajectories) -> tuple[np.ndarray, np.ndarray]:
    """Stack within-trajectory one-step pairs: X holds states, Y successors,
    both (f, M).  No pairs are formed across trajectory boundaries."""
    xs, ys = [], []
    for traj in trajectories:
        traj = np.asarray(traj, dtype=np.float64)
        if traj.shape[0] < 2:
            continue
        xs.append(traj[:-1])
        ys.append(traj[1:])
    if not xs:
        raise ValueError("no snapshot pairs: every trajectory has fewer than 2 states")
    return np.concatenate(xs).T, np.concatenate(ys).T


def ridge_operator(x: np.ndarray, y: np.ndarray, gamma: float):
    """Closed-form ridge fit C = Y X^T (X X^T + gamma I)^{-1}."""
    f = x.shape[0]
    gram = x @ x.T + gamma * np.eye(f)
    fallback = False
    if gamma == 0.0 and np.linalg.matrix_rank(gram) < f:
        # unregularized and rank-deficient: pseudo-inverse, flagged
        c = y @ np.linalg.pinv(x)
        fallback = True
    else:
        c = np.linalg.solve(gram, x @ y.T).T
    return c, fallback


def eig_sorted(operator: np.ndarray):
    """Complex eigenpairs sorted by decreasing modulus (index tie-break),
    unit-norm eigenvectors with the first significant entry made real
    positive.  Residuals are checked against 1e-8 * ||C||."""
    operator = np.asarray(operator, dtype=np.float64)
    if operator.ndim != 2 or operator.shape[0] != operator.shape[1]:
        raise ValueError(f"eig expects a square matrix, got {operator.shape}")
    try:
        vals, vecs = np.linalg.eig(operator)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"eigendecomposition failed to converge: {exc}") from exc
    order = sorted(range(len(vals)), key=lambda i: (-abs(vals[i]), i))
    vals = vals[order]
    vecs = vecs[:, order]
    for i in range(vecs.shape[1]):
        v = vecs[:, i]
        v = v / np.linalg.norm(v)
        mags = np.abs(v)
        j = int(np.argmax(mags > 1e-12 * mags.max())) if mags.max() > 0 else 0
        phase = v[j] / abs(v[j]) if abs(v[j]) > 0 else 1.0
        vecs[:, i] = v / phase
    norm_c = np.linalg.norm(operator)
    resid = np.linalg.norm(operator @ vecs - vecs * vals[None, :], axis=0)
    if norm_c > 0 and (resid > 1e-8 * norm_c).any():
        raise RuntimeError(f"eigenpair residual too large: max {resid.max():.3e} "
                           f"for ||C||={norm_c:.3e}")
    cond = np.linalg.cond(vecs)
    if cond > 1e10:
        warnings.warn(f"nearly defective operator: eigenvector condition "
                      f"number {cond:.2e}")
    return vals, vecs


def _fit(x, y, gamma, scope) -> DmdFit:
    c, fallback = ridge_operator(x, y, gamma)
    vals, vecs = eig_sorted(c)
    return DmdFit(operator=c, eigenvalues=vals, eigenvectors=vecs,
                  gamma=gamma, scope=scope, pinv_fallback=fallback)


def fit_dmd_global(graph_trajectories, gamma: float) -> DmdFit:
    """Fit one operator on pooled-state trajectories of many graphs."""
    x, y = snapshot_pairs(graph_trajectories)
    if x.shape[1] < x.shape[0]:
        raise ValueError(f"need at least dim+1={x.shape[0] + 1} snapshots, "
                         f"got {x.shape[1]} pairs")
    return _fit(x, y, gamma, "global")


def fit_dmd_node(node_trajectories: np.ndarray, gamma: float) -> DmdFit:
    """Fit one operator on the node trajectories (T, N, f) of a single graph."""
    node_trajectories = np.asarray(node_trajectories, dtype=np.float64)
    t, n, f = node_trajectories.shape
    trajs = [node_trajectories[:, i, :] for i in range(n)]
    x, y = snapshot_pairs(trajs)
    return _fit(x, y, gamma, "per-graph")


def mode_series(fit: DmdFit, trajectory: np.ndarray, mode: int) -> np.ndarray:
    """Koopman mode s(t): projection of a trajectory (T, f) onto eigenvector i.

    The conjugated eigenvector is used so that s(t+1) = lambda_i s(t) holds
    on exactly-linear data with a normal operator; for real trajectories this
    only conjugates the series, leaving every modulus-based weight unchanged.
    """
    return np.asarray(trajectory, dtype=np.float64) @ np.conj(fit.eigenvectors[:, mode])


def time_weight(series: np.ndarray) -> np.ndarray:
    """Modulus of the forward difference; entry t covers t -> t+1."""
    series = np.asarray(series)
    return np.abs(np.diff(series))


def node_weight(final_values: np.ndarray) -> np.ndarray:
    """Distance of each node's mode value from the node average."""
    final_values = np.asarray(final_values)
    return np.abs(final_values - final_values.mean())


def spatiotemporal_weight(node_series: np.ndarray) -> np.ndarray:
    """Per-time node deviations: rows are time steps, columns nodes."""
    node_series = np.asarray(node_series)
    return np.abs(node_series - node_series.mean(axis=1, keepdims=True))
