"""Experiment stages: generate, train, explain, and the grid search.

Every stage reads and writes files in a run directory, stamps its outputs
with a configuration hash, and refuses inputs produced under a different
configuration.  The evaluate/report stages live in ``tgx.evaluate`` so
they stay free of any model code.
"""

from __future__ import annotations

import itertools
from pathlib import Path

import numpy as np

from . import artifacts as art
from . import dmd as tgdmd
from . import model as tgmodel
from . import sindy as tgsindy
from .config import ConfigError, ExperimentConfig, stage_hashes
from .data import generate_dataset, read_dataset, write_dataset
from .reduction import fit_projection, project, save_projection

__all__ = ["stage_generate", "stage_train", "stage_explain", "stage_grid"]


def stage_generate(cfg: ExperimentConfig, out: Path) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    hashes = stage_hashes(cfg)
    items = generate_dataset(cfg.generator())
    path = out / art.DATASET
    write_dataset(path, items)
    art.write_json(out / art.DATASET_META, {
        "config_hash": hashes["generate"],
        "num_graphs": len(items),
    })
    return path


def _check_dataset(out: Path, dataset_path, expected_hash: str, stage: str):
    dataset_path = Path(dataset_path) if dataset_path else out / art.DATASET
    art.require(dataset_path, stage, "generate")
    meta_path = dataset_path.parent / art.DATASET_META
    if meta_path.exists():
        art.check_hash(art.read_json(meta_path).get("config_hash"),
                       expected_hash, str(dataset_path))
    return dataset_path


def stage_train(cfg: ExperimentConfig, out: Path, dataset_path=None,
                log=None) -> dict:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    hashes = stage_hashes(cfg)
    dataset_path = _check_dataset(out, dataset_path, hashes["generate"], "train")

    graphs = [tg for tg, _ in read_dataset(dataset_path)]
    params, history = tgmodel.train(graphs, cfg.model(), log=log)

    tgmodel.save_checkpoint(out / art.CHECKPOINT, params,
                            extra={"config_hash": hashes["train"]})
    split_map = {gid: "train" for gid in history["split"]["train"]}
    split_map.update({gid: "val" for gid in history["split"]["val"]})
    tgmodel.dump_embeddings(out / art.EMBEDDINGS, params, graphs,
                            split_map=split_map, config_hash=hashes["train"])

    records, _ = tgmodel.read_embeddings(out / art.EMBEDDINGS)
    pooled = [rec["h_graph"] for rec in records]
    payload = {
        "config_hash": hashes["train"],
        "accuracy": history["best_val_acc"],
        "train_accuracy": history["best_train_acc"],
        "best_epoch": history["best_epoch"],
        "linearity_residual": tgmodel.linear_fit_residual(pooled),
        "linearity_residual_relative": tgmodel.linear_fit_residual(pooled,
                                                                   relative=True),
        "split": history["split"],
        "epochs": history["epochs"],
    }
    art.write_json(out / art.HISTORY, payload)
    return payload


def _load_embeddings(cfg, out, embeddings_path, dataset_path, train_hash):
    """Embedding records for explain; recomputed from the checkpoint when
    only the checkpoint is present."""
    embeddings_path = Path(embeddings_path) if embeddings_path else out / art.EMBEDDINGS
    if not embeddings_path.exists():
        ckpt = art.require(out / art.CHECKPOINT, "explain", "train")
        params, payload = tgmodel.load_checkpoint(ckpt)
        art.check_hash(payload.get("config_hash"), train_hash, str(ckpt))
        history = art.read_json(art.require(out / art.HISTORY, "explain", "train"))
        graphs = [tg for tg, _ in read_dataset(dataset_path)]
        split_map = {gid: "train" for gid in history["split"]["train"]}
        split_map.update({gid: "val" for gid in history["split"]["val"]})
        tgmodel.dump_embeddings(embeddings_path, params, graphs,
                                split_map=split_map, config_hash=train_hash)
    records, header = tgmodel.read_embeddings(embeddings_path)
    art.check_hash(header.get("config_hash"), train_hash, str(embeddings_path))
    return records


def stage_explain(cfg: ExperimentConfig, out: Path, dataset_path=None,
                  embeddings_path=None) -> dict:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    hashes = stage_hashes(cfg)
    dataset_path = _check_dataset(out, dataset_path, hashes["generate"], "explain")
    records = _load_embeddings(cfg, out, embeddings_path, dataset_path, hashes["train"])

    flat = cfg.flat
    gamma = flat["dmd.gamma"]
    eta = flat["sindy.eta"]
    edges_by_id = {tg.id: tg.edges for tg, _ in read_dataset(dataset_path)}

    train_recs = [r for r in records if r["split"] == "train"]
    eval_recs = [r for r in records if r["split"] == "val"]
    if not train_recs or not eval_recs:
        raise ConfigError("explain needs both a train and a validation split")

    # one projection, fit on training-split node states, applied everywhere
    stacked = np.concatenate([r["h_node"].reshape(-1, r["h_node"].shape[-1])
                              for r in train_recs])
    proj = fit_projection(flat["reduction.method"], stacked, flat["reduction.dim"])
    save_projection(out / art.PROJECTION, proj, config_hash=hashes["explain"])

    global_fit = tgdmd.fit_dmd_global(
        [project(proj, r["h_graph"]) for r in train_recs], gamma)

    def c_pair(z):
        return [float(z.real), float(z.imag)]

    expl_records = []
    edge_records = []
    for rec in sorted(eval_recs, key=lambda r: r["id"]):
        graph_traj = project(proj, rec["h_graph"])
        node_traj = project(proj, rec["h_node"])
        node_fit = tgdmd.fit_dmd_node(node_traj, gamma)
        for mode in (0, 1):
            s_global = tgdmd.mode_series(global_fit, graph_traj, mode)
            v_glob = np.conj(global_fit.eigenvectors[:, mode])
            v_node = np.conj(node_fit.eigenvectors[:, mode])
            s_nodes_global = node_traj @ v_glob
            s_nodes_graph = node_traj @ v_node
            w_g = tgdmd.spatiotemporal_weight(s_nodes_graph)
            expl_records.append({
                "id": rec["id"], "label": rec["label"], "split": rec["split"],
                "mode": mode,
                "eigenvalues_global": [c_pair(z) for z in global_fit.eigenvalues],
                "eigenvalues_graph": [c_pair(z) for z in node_fit.eigenvalues],
                "s": [c_pair(z) for z in s_global],
                "w_t": tgdmd.time_weight(s_global).tolist(),
                "w_s_global": tgdmd.node_weight(s_nodes_global[-1]).tolist(),
                "w_s_node": tgdmd.node_weight(s_nodes_graph[-1]).tolist(),
                "w_g": w_g.tolist(),
            })
        for degree in (2, 3):
            fits = tgsindy.fit_graph_sindy(node_traj, edges_by_id[rec["id"]],
                                           degree=degree, eta=eta)
            weights = tgsindy.edge_weights(fits)
            edge_records.append({
                "id": rec["id"], "label": rec["label"], "split": rec["split"],
                "degree": degree, "eta": eta,
                "edges": [[u, v, w] for (u, v), w in sorted(weights.items())],
            })

    header = {"config_hash": hashes["explain"],
              "reduction": flat["reduction.method"], "dim": flat["reduction.dim"],
              "gamma": gamma,
              "global_eigenvalues": [c_pair(z) for z in global_fit.eigenvalues],
              "pinv_fallback": global_fit.pinv_fallback}
    art.write_jsonl(out / art.EXPLANATIONS, header, expl_records)
    art.write_jsonl(out / art.EDGE_WEIGHTS, {"config_hash": hashes["explain"],
                                             "eta": eta}, edge_records)
    return {"explanations": len(expl_records), "edge_records": len(edge_records)}


def stage_grid(cfg: ExperimentConfig, out: Path, log=print) -> dict:
    """Grid search: model candidates ranked by validation accuracy, then
    explainer candidates on the best model ranked by windowed F1."""
    from .evaluate import stage_evaluate  # local import keeps evaluate isolated

    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    flat = cfg.flat
    model_keys = [k for k in cfg.list_keys() if k.startswith("model.")]
    expl_keys = [k for k in cfg.list_keys()
                 if k.startswith(("reduction.", "dmd.", "sindy.", "metrics."))]

    def combos(keys):
        if not keys:
            return [dict()]
        return [dict(zip(keys, values))
                for values in itertools.product(*(flat[k] for k in keys))]

    def resolved(overrides):
        merged = dict(flat)
        merged.update(overrides)
        for k, v in list(merged.items()):
            if isinstance(v, list):
                merged[k] = v[0]
        return ExperimentConfig(merged)

    dataset_path = out / art.DATASET
    if not dataset_path.exists():
        stage_generate(resolved({}), out)

    rows = []
    model_runs = []
    for i, overrides in enumerate(combos(model_keys)):
        run_cfg = resolved(overrides)
        run_dir = out / "grid" / f"model_{i:03d}"
        run_dir.mkdir(parents=True, exist_ok=True)
        summary = stage_train(run_cfg, run_dir, dataset_path=dataset_path)
        desc = ";".join(f"{k}={overrides[k]}" for k in model_keys) or "defaults"
        model_runs.append((i, overrides, summary))
        rows.append({"section": "model", "run": f"model_{i:03d}", "params": desc,
                     "val_accuracy": summary["accuracy"],
                     "linearity_residual": summary["linearity_residual"],
                     "f1_window": ""})
        if log:
            log(f"[grid] model_{i:03d} {desc}: accuracy={summary['accuracy']:.3f} "
                f"residual={summary['linearity_residual']:.4f}")

    best_i, best_model_overrides, _ = max(
        model_runs, key=lambda entry: (entry[2]["accuracy"], -entry[0]))
    best_dir = out / "grid" / f"model_{best_i:03d}"

    expl_runs = []
    for j, overrides in enumerate(combos(expl_keys)):
        run_cfg = resolved({**best_model_overrides, **overrides})
        run_dir = out / "grid" / f"expl_{j:03d}"
        run_dir.mkdir(parents=True, exist_ok=True)
        stage_explain(run_cfg, run_dir, dataset_path=dataset_path,
                      embeddings_path=best_dir / art.EMBEDDINGS)
        table = stage_evaluate(run_cfg, run_dir, dataset_path=dataset_path,
                               history_path=best_dir / art.HISTORY)
        f1 = table["f1_window"]["mean"]
        desc = ";".join(f"{k}={overrides[k]}" for k in expl_keys) or "defaults"
        expl_runs.append((j, overrides, f1))
        rows.append({"section": "explainer", "run": f"expl_{j:03d}", "params": desc,
                     "val_accuracy": "", "linearity_residual": "",
                     "f1_window": f1})
        if log:
            log(f"[grid] expl_{j:03d} {desc}: f1_window={f1:.3f}")

    best_j, best_expl_overrides, _ = max(
        expl_runs, key=lambda entry: (entry[2], -entry[0]))

    with open(out / "grid_results.csv", "w", encoding="utf-8") as fh:
        fh.write("section,run,params,val_accuracy,linearity_residual,f1_window\n")
        for row in rows:
            fh.write(f"{row['section']},{row['run']},\"{row['params']}\","
                     f"{row['val_accuracy']},{row['linearity_residual']},"
                     f"{row['f1_window']}\n")

    best_flat = resolved({**best_model_overrides, **best_expl_overrides}).flat
    with open(out / "best_config.cfg", "w", encoding="utf-8") as fh:
        for key in sorted(best_flat):
            fh.write(f"{key} = {best_flat[key]}\n")
    return {"best_model": best_model_overrides, "best_explainer": best_expl_overrides,
            "rows": rows}
