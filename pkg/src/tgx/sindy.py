"""Neighbor-restricted sparse regression of node embedding dynamics.

For each node the next reduced state is regressed onto a library of
monomials built only from the node itself and the nodes it is ever
adjacent to.  The sparse solver is sequentially thresholded least squares;
absolute coefficients aggregated over both endpoints give each edge an
importance weight.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Term",
    "LibrarySpec",
    "SindyFit",
    "build_library_spec",
    "build_library",
    "sparse_regress",
    "fit_graph_sindy",
    "edge_weights",
    "ever_neighbors",
]


@dataclass(frozen=True)
class Term:
    kind: str           # "self2" | "self3" | "cross" | "cross2a" | "cross2b"
    neighbor: int | None = None  # None for self terms

    def references(self, node: int):
        """The unordered node pair this term speaks about, or None."""
        if self.neighbor is None:
            return None
        return (min(node, self.neighbor), max(node, self.neighbor))


@dataclass
class LibrarySpec:
    node: int
    degree: int                 # 2 or 3
    neighbors: tuple            # sorted, ever-adjacent node ids
    terms: list                 # ordered Term list

    @property
    def size(self) -> int:
        return len(self.terms)


def ever_neighbors(edges, num_nodes: int) -> list:
    """For each node, the sorted set of nodes adjacent to it at any time."""
    nbrs = [set() for _ in range(num_nodes)]
    for step in edges:
        for (u, v) in step:
            nbrs[u].add(v)
            nbrs[v].add(u)
    return [sorted(s) for s in nbrs]


def build_library_spec(node: int, neighbors, degree: int) -> LibrarySpec:
    if degree not in (2, 3):
        raise ValueError(f"degree cap must be 2 or 3, got {degree}")
    neighbors = tuple(sorted(neighbors))
    terms = [Term("self2")]
    if degree == 3:
        terms.append(Term("self3"))
    for m in neighbors:
        terms.append(Term("cross", m))
        if degree == 3:
            terms.append(Term("cross2a", m))
            terms.append(Term("cross2b", m))
    return LibrarySpec(node=node, degree=degree, neighbors=neighbors, terms=terms)


def build_library(own: np.ndarray, neighbor_trajs: dict, spec: LibrarySpec) -> np.ndarray:
    """Evaluate the monomial columns elementwise: (T-1, f, J)."""
    own = np.asarray(own, dtype=np.float64)
    cols = []
    for term in spec.terms:
        if term.kind == "self2":
            cols.append(own * own)
        elif term.kind == "self3":
            cols.append(own ** 3)
        else:
            other = np.asarray(neighbor_trajs[term.neighbor], dtype=np.float64)
            if term.kind == "cross":
                cols.append(own * other)
            elif term.kind == "cross2a":
                cols.append(own * other * other)
            elif term.kind == "cross2b":
                cols.append(own * own * other)
            else:
                raise ValueError(f"unknown term kind {term.kind}")
    return np.stack(cols, axis=-1)


@dataclass
class SindyFit:
    node: int
    coef: np.ndarray        # (J,) shared across feature dimensions
    threshold: float
    residual: float
    ridge_fallback: bool
    library: LibrarySpec


def _solve_ls(a: np.ndarray, b: np.ndarray, ridge_gamma: float):
    coef, _, rank, _ = np.linalg.lstsq(a, b, rcond=None)
    fallback = rank < a.shape[1]
    if fallback:
        gram = a.T @ a + ridge_gamma * np.eye(a.shape[1])
        coef = np.linalg.solve(gram, a.T @ b)
    return coef, fallback


def sparse_regress(theta: np.ndarray, targets: np.ndarray, eta: float,
                   max_iter: int = 20, normalize: bool = True,
                   ridge_gamma: float = 1e-10):
    """Sequentially thresholded least squares.

    ``theta`` is (T-1, f, J) or already flattened (R, J); ``targets`` the
    matching next states.  Columns are scaled to unit standard deviation
    before solving and the threshold applies to the scaled coefficients;
    returned coefficients are on the original scale.  Returns
    (coef, residual, ridge_fallback).
    """
    theta = np.asarray(theta, dtype=np.float64)
    if theta.ndim == 3:
        theta = theta.reshape(-1, theta.shape[-1])
    y = np.asarray(targets, dtype=np.float64).ravel()
    if theta.shape[0] != y.size:
        raise ValueError(f"{theta.shape[0]} library rows vs {y.size} targets")
    n_terms = theta.shape[1]

    if normalize:
        scale = theta.std(axis=0)
        scale[scale < 1e-300] = 1.0
    else:
        scale = np.ones(n_terms)
    scaled = theta / scale

    active = np.ones(n_terms, dtype=bool)
    coef_scaled = np.zeros(n_terms)
    fallback = False
    for _ in range(max_iter):
        if not active.any():
            break
        sol, fb = _solve_ls(scaled[:, active], y, ridge_gamma)
        fallback = fallback or fb
        coef_scaled = np.zeros(n_terms)
        coef_scaled[active] = sol
        keep = np.abs(coef_scaled) >= eta
        keep &= active
        if eta == 0.0 or keep.sum() == active.sum():
            active = keep if eta != 0.0 else active
            break
        active = keep
    coef_scaled[~active] = 0.0
    coef = coef_scaled / scale
    residual = float(np.linalg.norm(scaled @ coef_scaled - y))
    return coef, residual, fallback


def fit_graph_sindy(node_trajectories: np.ndarray, edges, degree: int, eta: float,
                    max_iter: int = 20) -> list:
    """Per-node sparse fits for one graph; trajectories are (T, N, f)."""
    node_trajectories = np.asarray(node_trajectories, dtype=np.float64)
    t, n, f = node_trajectories.shape
    nbr_lists = ever_neighbors(edges, n)
    fits = []
    for node in range(n):
        spec = build_library_spec(node, nbr_lists[node], degree)
        own = node_trajectories[:-1, node, :]
        nbr_trajs = {m: node_trajectories[:-1, m, :] for m in spec.neighbors}
        theta = build_library(own, nbr_trajs, spec)
        targets = node_trajectories[1:, node, :]
        coef, residual, fb = sparse_regress(theta, targets, eta, max_iter=max_iter)
        fits.append(SindyFit(node=node, coef=coef, threshold=eta,
                             residual=residual, ridge_fallback=fb, library=spec))
    return fits


def edge_weights(fits) -> dict:
    """Aggregate |coefficients| onto unordered edges from both endpoints."""
    weights: dict = {}
    for fit in fits:
        for j, term in enumerate(fit.library.terms):
            pair = term.references(fit.library.node)
            if pair is None:
                continue
            weights[pair] = weights.get(pair, 0.0) + abs(float(fit.coef[j]))
    return weights
