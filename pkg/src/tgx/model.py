"""Graph-convolutional recurrent classifier with a linear-dynamics regularizer.

The encoder applies a graph convolution to each snapshot and feeds the
result through a stack of bias-free LSTM layers; layer l > 1 consumes the
hidden state of layer l - 1 as its input.  A trainable square matrix
advances an internal copy of the states one step linearly; two auxiliary
loss terms pull the learned embedding dynamics toward that linear model.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .config import ModelConfig

__all__ = [
    "ModelConfig",
    "GcrnParams",
    "EmbeddingTrajectories",
    "TrainingDivergedError",
    "normalized_adjacency",
    "gcn_forward",
    "lstm_step",
    "encode",
    "readout",
    "koopman_reconstruct",
    "bce_loss",
    "loss_total",
    "predict_logit",
    "train",
    "linear_fit_residual",
    "save_checkpoint",
    "load_checkpoint",
    "dump_embeddings",
    "read_embeddings",
]

_GATES = ("xi", "hi", "xf", "hf", "xg", "hg", "xo", "ho")


class TrainingDivergedError(RuntimeError):
    """Raised when the training loss stops being finite."""


class GcrnParams:
    """All trainable tensors, keyed by name.

    Layout: ``gcn`` (in_dim x F) for the first layer's graph convolution;
    per layer ``l{i}.w_xx`` (F x F) for the eight LSTM gate matrices;
    ``mlp.{j}`` for the readout stack (FL -> ... -> 1, no biases);
    ``koopman`` (F x F), applied to state rows from the right, so the
    operator acting on column states is its transpose.
    """

    def __init__(self, cfg: ModelConfig, in_dim: int = 1,
                 rng: np.random.Generator | None = None):
        cfg.validate()
        if rng is None:
            rng = np.random.default_rng(cfg.seed)
        F, L = cfg.hidden, cfg.layers
        self.cfg = cfg
        self.in_dim = in_dim
        self.tensors: dict[str, Tensor] = {}
        self.tensors["gcn"] = Tensor(rng.normal(0.0, 1.0 / np.sqrt(in_dim), (in_dim, F)))
        for l in range(L):
            for gate in _GATES:
                self.tensors[f"l{l}.w_{gate}"] = Tensor(
                    rng.normal(0.0, 1.0 / np.sqrt(F), (F, F)))
        dims = [F * L] * cfg.mlp_layers + [1]
        for j in range(cfg.mlp_layers):
            self.tensors[f"mlp.{j}"] = Tensor(
                rng.normal(0.0, 1.0 / np.sqrt(dims[j]), (dims[j], dims[j + 1])))
        self.tensors["koopman"] = Tensor(np.eye(F) + 0.01 * rng.normal(size=(F, F)))

    def layer_weights(self, l: int) -> dict:
        return {gate: self.tensors[f"l{l}.w_{gate}"] for gate in _GATES}

    def values(self) -> dict:
        return {k: v.value.copy() for k, v in self.tensors.items()}

    def load_values(self, values: dict) -> None:
        for k, v in values.items():
            self.tensors[k].value = np.array(v, dtype=np.float64)


def normalized_adjacency(step_edges, num_nodes: int) -> np.ndarray:
    """Symmetrically normalized adjacency with self-loops added."""
    a = np.eye(num_nodes)
    for (u, v) in step_edges:
        a[u, v] = 1.0
        a[v, u] = 1.0
    d = a.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(d)
    return a * inv_sqrt[:, None] * inv_sqrt[None, :]


def gcn_forward(x: np.ndarray, step_edges, weight: Tensor,
                adjacency: np.ndarray | None = None) -> Tensor:
    """One graph convolution: normalized-adjacency mixing then a linear map."""
    if adjacency is None:
        adjacency = normalized_adjacency(step_edges, x.shape[0])
    mixed = adjacency @ np.asarray(x, dtype=np.float64)
    return ad.matmul(Tensor(mixed), weight)


def lstm_step(x_in: Tensor, h_prev: Tensor, c_prev: Tensor, weights: dict):
    """Bias-free LSTM cell; returns (h, c)."""
    i = ad.sigmoid(ad.add(ad.matmul(x_in, weights["xi"]), ad.matmul(h_prev, weights["hi"])))
    f = ad.sigmoid(ad.add(ad.matmul(x_in, weights["xf"]), ad.matmul(h_prev, weights["hf"])))
    g = ad.tanh(ad.add(ad.matmul(x_in, weights["xg"]), ad.matmul(h_prev, weights["hg"])))
    o = ad.sigmoid(ad.add(ad.matmul(x_in, weights["xo"]), ad.matmul(h_prev, weights["ho"])))
    c = ad.add(ad.mul(f, c_prev), ad.mul(i, g))
    h = ad.mul(o, ad.tanh(c))
    return h, c


class Trajectories:
    """Per-step tensors produced by the encoder."""

    def __init__(self, node_states, node_concat, graph_states):
        self.node_states = node_states    # [t][l] -> Tensor (N, F)
        self.node_concat = node_concat    # [t] -> Tensor (N, F*L)
        self.graph_states = graph_states  # [t] -> Tensor (1, F*L)

    @property
    def horizon(self) -> int:
        return len(self.graph_states)

    def to_arrays(self) -> "EmbeddingTrajectories":
        node = np.stack([
            np.stack([h.value for h in per_t], axis=1) for per_t in self.node_states
        ])  # (T, N, L, F)
        graph = np.concatenate([g.value for g in self.graph_states], axis=0)
        return EmbeddingTrajectories(node_states=node, graph_states=graph)


@dataclass
class EmbeddingTrajectories:
    """Numpy view of the encoder trajectories."""

    node_states: np.ndarray   # (T, N, L, F)
    graph_states: np.ndarray  # (T, F*L)

    @property
    def node_concat(self) -> np.ndarray:
        t, n, l, f = self.node_states.shape
        return self.node_states.reshape(t, n, l * f)

    @property
    def node_embeddings(self) -> np.ndarray:
        return self.node_concat[-1]

    @property
    def graph_embedding(self) -> np.ndarray:
        return self.graph_states[-1]


def encode(features: np.ndarray, adjacencies, params: GcrnParams) -> Trajectories:
    """Run the encoder over a temporal graph; initial h and c are zero."""
    F, L = params.cfg.hidden, params.cfg.layers
    features = np.asarray(features, dtype=np.float64)
    horizon, num_nodes = features.shape[0], features.shape[1]
    zero = Tensor(np.zeros((num_nodes, F)))
    h_prev = [zero] * L
    c_prev = [zero] * L

    node_states, node_concat, graph_states = [], [], []
    for t in range(horizon):
        x_t = features[t][:, None] if features.ndim == 2 else features[t]
        x_in = gcn_forward(x_t, None, params.tensors["gcn"], adjacency=adjacencies[t])
        per_layer = []
        for l in range(L):
            h, c = lstm_step(x_in, h_prev[l], c_prev[l], params.layer_weights(l))
            per_layer.append(h)
            h_prev[l], c_prev[l] = h, c
            x_in = h
        node_states.append(per_layer)
        cat = ad.concat(per_layer, axis=1)
        node_concat.append(cat)
        graph_states.append(ad.reduce_sum(cat, axis=0, keepdims=True))
    return Trajectories(node_states, node_concat, graph_states)


def readout(h: Tensor, params: GcrnParams) -> Tensor:
    """MLP on a pooled embedding row; tanh between hidden layers, linear out."""
    z = h
    last = params.cfg.mlp_layers - 1
    for j in range(params.cfg.mlp_layers):
        z = ad.matmul(z, params.tensors[f"mlp.{j}"])
        if j != last:
            z = ad.tanh(z)
    return z


def koopman_reconstruct(traj: Trajectories, koopman: Tensor):
    """One-step linear reconstructions of the pooled states.

    Returns a list indexed by time: entry t (t >= 1) is the pooled
    reconstruction predicted from the states at t - 1; entry 0 is None.
    """
    recon = [None]
    for t in range(1, traj.horizon):
        advanced = [ad.matmul(h, koopman) for h in traj.node_states[t - 1]]
        recon.append(ad.reduce_sum(ad.concat(advanced, axis=1), axis=0, keepdims=True))
    return recon


def bce_loss(logit: Tensor, label: int) -> Tensor:
    """Binary cross-entropy against a hard label, on the logit scale."""
    if label == 1:
        ll = ad.log(ad.sigmoid(logit))
    else:
        ll = ad.log(ad.sigmoid(ad.scale(logit, -1.0)))
    return ad.reduce_sum(ad.scale(ll, -1.0))


def loss_total(features, adjacencies, label: int, params: GcrnParams):
    """Classification loss plus the two linearity regularizers.

    Returns (loss tensor, logit float).  Terms with a zero coefficient are
    not built at all, so alpha = beta = 0 is exactly plain BCE training.
    """
    cfg = params.cfg
    traj = encode(features, adjacencies, params)
    y = readout(traj.graph_states[-1], params)
    loss = bce_loss(y, label)

    horizon = traj.horizon
    if horizon >= 2 and (cfg.alpha != 0.0 or cfg.beta != 0.0):
        koopman = params.tensors["koopman"]
        if cfg.beta != 0.0:
            recon = koopman_reconstruct(traj, koopman)
        else:
            advanced = [ad.matmul(h, koopman) for h in traj.node_states[horizon - 2]]
            recon = [None] * (horizon - 1)
            recon.append(ad.reduce_sum(ad.concat(advanced, axis=1), axis=0, keepdims=True))
        if cfg.alpha != 0.0:
            y_rec = readout(recon[-1], params)
            loss = ad.add(loss, ad.scale(bce_loss(y_rec, label), cfg.alpha))
        if cfg.beta != 0.0:
            sq_sum = None
            for t in range(1, horizon):
                diff = ad.sub(traj.graph_states[t], recon[t])
                term = ad.reduce_sum(ad.mul(diff, diff))
                sq_sum = term if sq_sum is None else ad.add(sq_sum, term)
            dim = cfg.hidden * cfg.layers
            mse = ad.scale(sq_sum, 1.0 / ((horizon - 1) * dim))
            k_l2 = ad.scale(ad.reduce_sum(ad.mul(koopman, koopman)), cfg.koopman_decay)
            loss = ad.add(loss, ad.scale(ad.add(mse, k_l2), cfg.beta))
    return loss, float(y.value.ravel()[0])


def predict_logit(features, adjacencies, params: GcrnParams) -> float:
    traj = encode(features, adjacencies, params)
    return float(readout(traj.graph_states[-1], params).value.ravel()[0])


def _adjacency_stack(tg) -> list:
    return [normalized_adjacency(step, tg.num_nodes) for step in tg.edges]


def _accuracy(graphs, adj_cache, params) -> float:
    if not graphs:
        return float("nan")
    hits = 0
    for tg in graphs:
        logit = predict_logit(tg.features, adj_cache[tg.id], params)
        hits += int((logit > 0.0) == bool(tg.label))
    return hits / len(graphs)


def stratified_split(graphs, val_fraction: float, rng: np.random.Generator):
    """Class-stratified train/validation index split."""
    train_idx, val_idx = [], []
    for cls in (0, 1):
        idx = [i for i, tg in enumerate(graphs) if tg.label == cls]
        idx = [idx[j] for j in rng.permutation(len(idx))]
        n_val = int(round(val_fraction * len(idx)))
        val_idx.extend(idx[:n_val])
        train_idx.extend(idx[n_val:])
    return sorted(train_idx), sorted(val_idx)


def train(graphs, cfg: ModelConfig, log=None):
    """Mini-batch Adam training; returns (params at best validation, history).

    Deterministic given ``cfg.seed``.  Raises TrainingDivergedError on a
    non-finite loss.
    """
    cfg.validate()
    if not graphs:
        raise ValueError("empty dataset")
    labels = {tg.label for tg in graphs}
    if labels != {0, 1}:
        raise ValueError("training data must contain both classes")

    params = GcrnParams(cfg, in_dim=1, rng=np.random.default_rng([cfg.seed, 0]))
    split_rng = np.random.default_rng([cfg.seed, 1])
    batch_rng = np.random.default_rng([cfg.seed, 2])
    train_idx, val_idx = stratified_split(graphs, cfg.val_fraction, split_rng)
    adj_cache = {tg.id: _adjacency_stack(tg) for tg in graphs}

    optimizer = ad.Adam(params.tensors, lr=cfg.lr)
    history = {
        "epochs": [],
        "split": {"train": [graphs[i].id for i in train_idx],
                  "val": [graphs[i].id for i in val_idx]},
    }
    best = {"val_acc": -1.0, "train_acc": -1.0, "epoch": -1, "values": params.values()}

    for epoch in range(cfg.epochs):
        order = [train_idx[j] for j in batch_rng.permutation(len(train_idx))]
        epoch_loss = 0.0
        hits = 0
        for start in range(0, len(order), cfg.batch):
            batch = order[start:start + cfg.batch]
            grad_sum = None
            for i in batch:
                tg = graphs[i]
                loss, logit = loss_total(tg.features, adj_cache[tg.id], tg.label, params)
                value = float(loss.value)
                if not np.isfinite(value):
                    raise TrainingDivergedError(
                        f"non-finite loss {value} at epoch {epoch}, graph {tg.id}")
                epoch_loss += value
                hits += int((logit > 0.0) == bool(tg.label))
                g = ad.gradients(loss, params.tensors)
                if grad_sum is None:
                    grad_sum = g
                else:
                    for k in grad_sum:
                        grad_sum[k] += g[k]
            optimizer.step({k: v / len(batch) for k, v in grad_sum.items()})
        train_acc = hits / len(order)
        val_acc = _accuracy([graphs[i] for i in val_idx], adj_cache, params)
        record = {"epoch": epoch, "train_loss": epoch_loss / len(order),
                  "train_acc": train_acc, "val_acc": val_acc}
        history["epochs"].append(record)
        if log is not None:
            log(record)
        # ties keep the latest epoch: equal accuracy, more regularization
        score = val_acc if val_idx else train_acc
        ref = best["val_acc"] if val_idx else best["train_acc"]
        if score >= ref:
            best.update(val_acc=val_acc, train_acc=train_acc, epoch=epoch,
                        values=params.values())

    params.load_values(best["values"])
    history["best_epoch"] = best["epoch"]
    history["best_val_acc"] = best["val_acc"]
    history["best_train_acc"] = best["train_acc"]
    return params, history


def linear_fit_residual(graph_state_list, gamma: float = 1e-9,
                        relative: bool = False) -> float:
    """Residual of the best one-step linear model over pooled embedding
    trajectories: ||Y - CX||_F with C a ridge fit, divided by ||Y||_F when
    ``relative`` is set."""
    xs, ys = [], []
    for states in graph_state_list:
        states = np.asarray(states)
        xs.append(states[:-1])
        ys.append(states[1:])
    x = np.concatenate(xs, axis=0).T
    y = np.concatenate(ys, axis=0).T
    gram = x @ x.T + gamma * np.eye(x.shape[0])
    c = np.linalg.solve(gram, x @ y.T).T
    resid = float(np.linalg.norm(y - c @ x))
    return resid / max(np.linalg.norm(y), 1e-300) if relative else resid


# ---------------------------------------------------------------------------
# persistence: checkpoints and embedding dumps (versioned JSON containers)

CHECKPOINT_VERSION = 1
EMBEDDING_VERSION = 1


def save_checkpoint(path, params: GcrnParams, extra: dict | None = None) -> None:
    cfg = params.cfg
    payload = {
        "version": CHECKPOINT_VERSION,
        "model": {"hidden": cfg.hidden, "layers": cfg.layers,
                  "mlp_layers": cfg.mlp_layers, "alpha": cfg.alpha, "beta": cfg.beta,
                  "koopman_decay": cfg.koopman_decay, "in_dim": params.in_dim},
        "params": [
            {"name": k, "shape": list(params.tensors[k].value.shape),
             "values": params.tensors[k].value.ravel().tolist()}
            for k in sorted(params.tensors)
        ],
    }
    if extra:
        payload.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_checkpoint(path):
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('version')}")
    m = payload["model"]
    cfg = ModelConfig(hidden=m["hidden"], layers=m["layers"], mlp_layers=m["mlp_layers"],
                      alpha=m["alpha"], beta=m["beta"], koopman_decay=m["koopman_decay"])
    params = GcrnParams(cfg, in_dim=m.get("in_dim", 1))
    for entry in payload["params"]:
        arr = np.asarray(entry["values"], dtype=np.float64).reshape(entry["shape"])
        params.tensors[entry["name"]].value = arr
    return params, payload


def dump_embeddings(path, params: GcrnParams, graphs, split_map: dict | None = None,
                    config_hash: str | None = None) -> None:
    """Persist per-graph trajectories (exact float round-trip via JSON repr)."""
    cfg = params.cfg
    with open(path, "w", encoding="utf-8") as fh:
        header = {"record": "header", "version": EMBEDDING_VERSION,
                  "hidden": cfg.hidden, "layers": cfg.layers}
        if config_hash is not None:
            header["config_hash"] = config_hash
        fh.write(json.dumps(header, separators=(",", ":")) + "\n")
        for tg in graphs:
            traj = encode(tg.features, _adjacency_stack(tg), params).to_arrays()
            rec = {
                "id": tg.id,
                "label": int(tg.label),
                "split": (split_map or {}).get(tg.id, ""),
                "T": int(tg.horizon),
                "N": int(tg.num_nodes),
                "L": cfg.layers,
                "F": cfg.hidden,
                "h_node": traj.node_concat.tolist(),
                "h_graph": traj.graph_states.tolist(),
            }
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def read_embeddings(path):
    """Load an embedding dump; returns (records, header)."""
    records, header = [], {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            if obj.get("record") == "header":
                header = obj
                continue
            obj["h_node"] = np.asarray(obj["h_node"], dtype=np.float64)
            obj["h_graph"] = np.asarray(obj["h_graph"], dtype=np.float64)
            records.append(obj)
    return records, header
