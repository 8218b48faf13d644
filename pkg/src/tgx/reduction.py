"""PCA/SVD projection of embeddings to a lower dimension.

PCA mean-centers before the singular value decomposition, SVD does not;
both keep the top components by singular value.  For reproducibility each
component's largest-magnitude entry is made positive.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = ["Projection", "fit_projection", "project", "save_projection", "load_projection"]


@dataclass
class Projection:
    method: str                # "pca" | "svd"
    components: np.ndarray     # (f, D) orthonormal rows, decreasing singular value
    mean: np.ndarray | None    # (D,) for pca, None for svd
    explained_variance_ratio: np.ndarray  # (f,)

    @property
    def dim(self) -> int:
        return self.components.shape[0]


def fit_projection(method: str, data: np.ndarray, dim: int) -> Projection:
    method = method.lower()
    if method not in ("pca", "svd"):
        raise ValueError(f"unknown reduction method '{method}'")
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise ValueError("data must be a 2-d matrix")
    m, d = data.shape
    if dim < 1 or dim > d:
        raise ValueError(f"dim={dim} outside [1, {d}]")
    if m < dim:
        raise ValueError(f"need at least {dim} rows, got {m}")

    mean = data.mean(axis=0) if method == "pca" else None
    centered = data - mean if mean is not None else data
    _, s, vt = np.linalg.svd(centered, full_matrices=False)

    tol = (s[0] if s.size else 0.0) * max(m, d) * np.finfo(np.float64).eps
    rank = int((s > tol).sum())
    if rank < dim:
        warnings.warn(f"data rank {rank} below requested dimension {dim}; "
                      "trailing variance ratios set to zero")

    components = vt[:dim].copy()
    for row in components:
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            row *= -1.0
    total = float((s ** 2).sum())
    ratios = (s[:dim] ** 2) / total if total > 0 else np.zeros(dim)
    ratios = ratios.copy()
    ratios[rank:] = 0.0
    return Projection(method, components, mean, ratios)


def project(proj: Projection, vectors: np.ndarray) -> np.ndarray:
    """Map vectors (last axis = D) down to the component span."""
    vectors = np.asarray(vectors, dtype=np.float64)
    if proj.mean is not None:
        vectors = vectors - proj.mean
    return vectors @ proj.components.T


def save_projection(path, proj: Projection, config_hash: str | None = None) -> None:
    payload = {
        "version": 1,
        "method": proj.method,
        "components": proj.components.tolist(),
        "mean": None if proj.mean is None else proj.mean.tolist(),
        "explained_variance_ratio": proj.explained_variance_ratio.tolist(),
    }
    if config_hash is not None:
        payload["config_hash"] = config_hash
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_projection(path) -> Projection:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    mean = payload["mean"]
    return Projection(
        method=payload["method"],
        components=np.asarray(payload["components"], dtype=np.float64),
        mean=None if mean is None else np.asarray(mean, dtype=np.float64),
        explained_variance_ratio=np.asarray(payload["explained_variance_ratio"]),
    )
