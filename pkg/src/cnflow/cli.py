"""Experiment runner.

Subcommands reproduce the desk-scale experiments from declarative JSON
configs and emit plot-ready CSV / JSON artifacts (no figures):

  toy1d        1-D contrastive flow vs the analytic truncated difference
  toy2d        2-D comparison of the contrastive flow and the two-flow ratio
  clamp-sweep  1-D toy retrained per clamp threshold
  mu-sweep     contaminated / narrow contrastive mixtures on synthetic clusters
  informed     known outliers mixed into the contrastive set
  tabular      marginal-permutation contrastive on correlated tabular data
  train        fit a model on a feature file, write a CFLW model file
  score        score a feature file under a saved model
  eval         AUROC / ROC / histogram / Wilcoxon from score files
  report       one-vs-rest confusion matrix over class feature files

Every run is deterministic given (config, seed): re-running writes
byte-identical artifacts.  Exit codes: 0 ok, 1 numeric failure,
2 usage/config error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
from pathlib import Path

import numpy as np

from . import baselines, datasets, flows, metrics, oracle, training
from .errors import ConfigError, FormatError, NumericError
from .flows import FlowConfig
from .methods import METHODS, fit_method
from .training import TrainConfig


# ---------------------------------------------------------------------------
# configuration plumbing

DEFAULTS: dict[str, dict] = {
    "toy1d": {
        "seed": 0,
        "reps": 1,
        "n_train": 20000,
        "n_contrastive": 20000,
        "inlier": {"mean": [0.0], "sd": [1.0]},
        "contrastive": {"mean": [1.0], "sd": [2.0]},
        "epsilon": -6.0,
        "grid": {"lo": -6.0, "hi": 6.0, "n": 4001},
        "model": {"n_blocks": 8, "hidden_width": 64, "clamp_alpha": 3.0},
        "train": {"batch_size": 1024, "lr": 1e-3, "max_epochs": 60,
                  "patience": 1000000, "val_fraction": 0.0},
    },
    "toy2d": {
        "seed": 0,
        "n_train": 8000,
        "n_contrastive": 8000,
        "inlier_mean": [1.0, 1.0],
        "contrastive_mean": [0.0, 0.0],
        "epsilon": -6.0,
        "grid": {"lo": -6.0, "hi": 6.0, "n": 61},
        "n_scatter": 500,
        "model": {"n_blocks": 8, "hidden_width": 64, "clamp_alpha": 3.0},
        "train": {"batch_size": 512, "lr": 1e-3, "max_epochs": 30,
                  "patience": 1000000, "val_fraction": 0.0},
    },
    "clamp-sweep": {
        "seed": 0,
        "epsilons": [0.0, -2.0, -6.0, -20.0],
        "n_train": 20000,
        "n_contrastive": 20000,
        "inlier": {"mean": [0.0], "sd": [1.0]},
        "contrastive": {"mean": [1.0], "sd": [2.0]},
        "grid": {"lo": -6.0, "hi": 6.0, "n": 4001},
        "model": {"n_blocks": 8, "hidden_width": 64, "clamp_alpha": 3.0},
        "train": {"batch_size": 1024, "lr": 1e-3, "max_epochs": 60,
                  "patience": 1000000, "val_fraction": 0.0},
    },
    "mu-sweep": {
        "seed": 0,
        "reps": 3,
        "variant": "contaminated",
        "mu_grid": [0.0, 0.25, 0.5, 0.75, 1.0],
        "methods": ["cf", "flow_ratio", "nll_flow"],
        "contrastive_total": 2000,
        "bench": {"dim": 8, "seed": 7, "hard_angle": 0.25, "radius": 2.0,
                  "cluster_sd": 0.5, "broad_sd": 2.0, "n_train": 2000,
                  "n_test": 500, "n_pool": 4000,
                  "inlier_path": None, "hard_path": None,
                  "rest_path": None, "broad_path": None},
        "model": {"n_blocks": 8, "hidden_width": 64, "clamp_alpha": 3.0},
        "train": {"batch_size": 512, "lr": 1e-3, "max_epochs": 60,
                  "patience": 10, "val_fraction": 0.1, "clamp_tau": 12.0},
    },
    "informed": {
        "seed": 0,
        "reps": 3,
        "variant": "informed",
        "mu_grid": [0.5, 1.0],
        "methods": ["cf"],
        "contrastive_total": 2000,
        "bench": {"dim": 8, "seed": 7, "hard_angle": 0.25, "radius": 2.0,
                  "cluster_sd": 0.5, "broad_sd": 2.0, "n_train": 2000,
                  "n_test": 500, "n_pool": 4000,
                  "inlier_path": None, "hard_path": None,
                  "rest_path": None, "broad_path": None},
        "model": {"n_blocks": 8, "hidden_width": 64, "clamp_alpha": 3.0},
        "train": {"batch_size": 512, "lr": 1e-3, "max_epochs": 60,
                  "patience": 10, "val_fraction": 0.1, "clamp_tau": 12.0},
    },
    "tabular": {
        "seed": 0,
        "data_path": None,
        "methods": ["nll_flow", "cf", "flow_ratio"],
        "synthetic": {"dim": 6, "n_inlier": 4000, "n_outlier": 400,
                      "correlation": 0.9, "outlier_sd": 1.0},
        "test_fraction": 0.25,
        "model": {"n_blocks": 8, "hidden_width": 64, "clamp_alpha": 3.0},
        "train": {"batch_size": 256, "lr": 1e-3, "max_epochs": 40,
                  "patience": 10, "val_fraction": 0.1, "clamp_tau": 12.0},
    },
    "train": {
        "seed": 0,
        "data_path": None,
        "contrastive_path": None,
        "objective": "contrastive",
        "model_out": "model.cflw",
        "history_out": "history.json",
        "model": {"n_blocks": 8, "hidden_width": 512, "clamp_alpha": 3.0},
        "train": {"batch_size": 256, "lr": 1e-3, "max_epochs": 50,
                  "patience": 10, "val_fraction": 0.1, "clamp_tau": 0.0},
    },
    "score": {"model_path": None, "data_path": None, "scores_out": "scores.csv"},
    "eval": {
        "inlier_scores": None,
        "outlier_scores": None,
        "paired_a": None,
        "paired_b": None,
        "n_bins": 50,
        "method": "scores",
        "report_out": "report.json",
        "roc_out": "roc.csv",
        "hist_out": "hist.csv",
    },
    "report": {
        "seed": 0,
        "class_paths": None,
        "contrastive_path": None,
        "methods": ["cf"],
        "test_fraction": 0.2,
        "synthetic": {"dim": 8, "n_classes": 3, "n_per_class": 1200,
                      "cluster_sd": 0.5, "radius": 2.0, "broad_sd": 2.0,
                      "n_broad": 3000},
        "model": {"n_blocks": 8, "hidden_width": 64, "clamp_alpha": 3.0},
        "train": {"batch_size": 256, "lr": 1e-3, "max_epochs": 30,
                  "patience": 10, "val_fraction": 0.1, "clamp_tau": 12.0},
    },
}


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key not in out:
            raise ConfigError(f"unknown config key {key!r}")
        if isinstance(out[key], dict) and isinstance(value, dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(kind: str, path: str | None, overrides: dict) -> dict:
    if kind not in DEFAULTS:
        raise ConfigError(f"unknown experiment kind {kind!r}")
    cfg = copy.deepcopy(DEFAULTS[kind])
    if path is not None:
        with open(path) as fh:
            try:
                user = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config is not valid JSON: {exc}") from None
        cfg = _merge(cfg, user)
    for key, value in overrides.items():
        if value is not None:
            cfg[key] = value
    return cfg


def _train_config(cfg: dict, **extra) -> TrainConfig:
    merged = dict(cfg.get("train", {}))
    merged.update(extra)
    try:
        return TrainConfig(**merged)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad train config: {exc}") from None


def _flow_config(cfg: dict) -> FlowConfig:
    try:
        return FlowConfig(**cfg.get("model", {}))
    except TypeError as exc:
        raise ConfigError(f"bad model config: {exc}") from None


def _out_dir(cfg: dict) -> Path:
    out = cfg.get("out")
    if not out:
        raise ConfigError("an output directory is required (--out)")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


# ---------------------------------------------------------------------------
# toy experiments

def _toy1d_parts(cfg: dict):
    p = oracle.GaussianSpec(cfg["inlier"]["mean"], cfg["inlier"]["sd"])
    q = oracle.GaussianSpec(cfg["contrastive"]["mean"], cfg["contrastive"]["sd"])
    grid = oracle.grid_1d(cfg["grid"]["lo"], cfg["grid"]["hi"], cfg["grid"]["n"])
    return p, q, grid


def _train_toy1d(cfg: dict, epsilon: float, seed: int):
    inl = datasets.gen_gaussian(cfg["inlier"]["mean"], cfg["inlier"]["sd"],
                                cfg["n_train"], seed=seed + 11)
    con = datasets.gen_gaussian(cfg["contrastive"]["mean"], cfg["contrastive"]["sd"],
                                cfg["n_contrastive"], seed=seed + 22)
    model = flows.build_model(1, _flow_config(cfg), seed)
    tc = _train_config(cfg, clamp_tau=-epsilon, seed=seed, objective="contrastive")
    model, history = training.train(model, inl, con, tc)
    return model, history


def run_toy1d(cfg: dict) -> dict:
    out = _out_dir(cfg)
    p, q, grid = _toy1d_parts(cfg)
    pbar = oracle.positive_difference(p, q, grid)
    model, history = _train_toy1d(cfg, cfg["epsilon"], cfg["seed"])
    learned = oracle.model_density_on_grid(model, grid)
    tv = oracle.tv_distance(learned, pbar)
    learned.save_csv(out / "learned_density.csv")
    pbar.save_csv(out / "oracle_density.csv")
    result = {
        "tv": tv,
        "oracle_integral": pbar.integral(),
        "model_integral": learned.integral(),
        "epsilon": cfg["epsilon"],
        "seed": cfg["seed"],
    }
    _write_json(out / "tv.json", result)
    history.save_json(out / "history.json")
    return result


def run_clamp_sweep(cfg: dict) -> list[dict]:
    out = _out_dir(cfg)
    p, q, grid = _toy1d_parts(cfg)
    pbar = oracle.positive_difference(p, q, grid)
    p_density = oracle.GridDensity(grid, oracle.density_values(p, pbar.points()).reshape(pbar.values.shape))
    results = []
    for k, eps in enumerate(cfg["epsilons"]):
        model, _ = _train_toy1d(cfg, eps, cfg["seed"])
        learned = oracle.model_density_on_grid(model, grid)
        learned.save_csv(out / f"learned_density_eps{k}.csv")
        results.append({
            "epsilon": eps,
            "tv_pbar": oracle.tv_distance(learned, pbar),
            "tv_p": oracle.tv_distance(learned, p_density),
        })
    _write_json(out / "tvs.json", results)
    return results


def run_toy2d(cfg: dict) -> dict:
    out = _out_dir(cfg)
    seed = cfg["seed"]
    inl = datasets.gen_gaussian(cfg["inlier_mean"], 1.0, cfg["n_train"], seed=seed + 11)
    con = datasets.gen_gaussian(cfg["contrastive_mean"], 1.0, cfg["n_contrastive"], seed=seed + 22)
    fc = _flow_config(cfg)

    cf = flows.build_model(2, fc, seed)
    training.train(cf, inl, con, _train_config(cfg, clamp_tau=-cfg["epsilon"],
                                               seed=seed, objective="contrastive"))
    flow_in = flows.build_model(2, fc, seed + 1)
    training.train(flow_in, inl, None, _train_config(cfg, seed=seed + 1, objective="nll"))
    flow_contr = flows.build_model(2, fc, seed + 2)
    training.train(flow_contr, con, None, _train_config(cfg, seed=seed + 2, objective="nll"))

    grid = oracle.grid_2d(cfg["grid"]["lo"], cfg["grid"]["hi"], cfg["grid"]["n"])
    pts = oracle.GridDensity(grid, np.zeros((len(grid[0]), len(grid[1])))).points()
    # exponential of the in-distribution score (= exp(log p) for the CF model,
    # exp(log p_in - log p_contr) for the ratio method)
    cf_vals = np.exp(flows.log_prob(cf, pts)).reshape(len(grid[0]), len(grid[1]))
    ratio_vals = np.exp(-baselines.ratio_score(flow_in, flow_contr, pts)).reshape(cf_vals.shape)
    oracle.GridDensity(grid, cf_vals).save_csv(out / "cf_grid.csv")
    oracle.GridDensity(grid, ratio_vals).save_csv(out / "ratio_grid.csv")

    n_scatter = cfg["n_scatter"]
    rows = []
    for label, fs in (("inlier", inl), ("contrastive", con)):
        for row in fs.data[:n_scatter]:
            rows.append((row[0], row[1], label))
    _write_csv(out / "samples.csv", ["x", "y", "label"], rows)

    corner = np.array([[-5.0, -5.0]])
    center = np.array([[cfg["inlier_mean"][0], cfg["inlier_mean"][1]]])
    fresh_inliers = datasets.gen_gaussian(cfg["inlier_mean"], 1.0, 2000, seed=seed + 33)
    inlier_density = np.exp(flows.log_prob(cf, fresh_inliers.data))
    summary = {
        "cf_corner": float(np.exp(flows.log_prob(cf, corner))[0]),
        "cf_center": float(np.exp(flows.log_prob(cf, center))[0]),
        "cf_inlier_p01": float(np.percentile(inlier_density, 1.0)),
        "ratio_corner": float(np.exp(-baselines.ratio_score(flow_in, flow_contr, corner))[0]),
        "ratio_center": float(np.exp(-baselines.ratio_score(flow_in, flow_contr, center))[0]),
        "seed": seed,
    }
    _write_json(out / "summary.json", summary)
    return summary


# ---------------------------------------------------------------------------
# mixture sweeps on synthetic clusters (or supplied feature files)

def _load_bench(cfg: dict) -> datasets.ClusterBenchmark:
    b = dict(cfg["bench"])
    file_keys = ("inlier_path", "hard_path", "rest_path", "broad_path")
    paths = {k: b.pop(k, None) for k in file_keys}
    if any(paths.values()):
        if not all(paths.values()):
            raise ConfigError(f"feature-file benchmarks need all of {file_keys}")
        inl = datasets.load_features(paths["inlier_path"])
        hard = datasets.load_features(paths["hard_path"])
        rest = datasets.load_features(paths["rest_path"])
        broad = datasets.load_features(paths["broad_path"])
        inl_train, inl_extra, inl_test = datasets.split(inl, (0.5, 0.3, 0.2), cfg["seed"])
        hard_pool, hard_test = datasets.split(hard, (0.7, 0.3), cfg["seed"] + 1)
        broad_pool, broad_val = datasets.split(broad, (0.85, 0.15), cfg["seed"] + 2)
        return datasets.ClusterBenchmark(inl_train, inl_extra, inl_test,
                                         hard_pool, hard_test, rest, broad_pool, broad_val)
    return datasets.cluster_benchmark(**b)


def run_mu_sweep(cfg: dict) -> list[dict]:
    out = _out_dir(cfg)
    variant = cfg["variant"]
    if variant not in ("contaminated", "narrow", "informed"):
        raise ConfigError(f"unknown mu-sweep variant {variant!r}")
    bench = _load_bench(cfg)
    fc = _flow_config(cfg)
    base_tc = _train_config(cfg, objective="contrastive")
    methods = cfg["methods"]
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}")
    reps = int(cfg["reps"])
    root = int(cfg["seed"])
    contaminant = bench.inlier_extra if variant == "contaminated" else bench.hard_pool

    rows = []
    table = []
    nll_cache: dict[int, tuple[float, float]] = {}
    for mu in cfg["mu_grid"]:
        per_method: dict[str, list[tuple[float, float]]] = {m: [] for m in methods}
        for rep in range(reps):
            rep_seed = root + rep
            contr = datasets.mix_datasets(datasets.MixSpec(
                bench.broad_pool, contaminant, mu, cfg["contrastive_total"],
                seed=rep_seed + 7000))
            for m in methods:
                if m == "nll_flow" and rep in nll_cache and mu != cfg["mu_grid"][0]:
                    per_method[m].append(nll_cache[rep])
                    continue
                fitted = fit_method(m, bench.inlier_train, contr, base_tc,
                                    rep_seed, fc, val_contrastive=bench.broad_val)
                s_in = fitted.score(bench.inlier_test.data)
                hard = metrics.auroc(s_in, fitted.score(bench.hard_test.data))
                rest = metrics.auroc(s_in, fitted.score(bench.rest_test.data))
                per_method[m].append((hard, rest))
                if m == "nll_flow":
                    nll_cache[rep] = (hard, rest)
        for m in methods:
            vals = np.array(per_method[m])
            hard_mean = 100.0 * float(vals[:, 0].mean())
            rest_mean = 100.0 * float(vals[:, 1].mean())
            sd = 100.0 * float(vals[:, 0].std())
            table.append((m, mu, hard_mean, rest_mean, sd))
            rows.append({"method": m, "mu": mu, "auroc_hard": hard_mean,
                         "auroc_rest": rest_mean, "sd": sd})
    _write_csv(out / "mu_sweep.csv", ["method", "mu", "auroc_hard", "auroc_rest", "sd"], table)
    _write_json(out / "mu_sweep.json", {"variant": variant, "rows": rows})
    return rows


# ---------------------------------------------------------------------------
# tabular experiment

def _tabular_data(cfg: dict, seed: int):
    if cfg["data_path"]:
        fs = datasets.load_features(cfg["data_path"])
        if fs.labels is None:
            raise ConfigError("tabular data file needs a label column")
        inliers = fs.take(np.flatnonzero(fs.labels == datasets.LABEL_INLIER))
        outliers = fs.take(np.flatnonzero(fs.labels == datasets.LABEL_OUTLIER))
        if outliers.n == 0:
            raise ConfigError("tabular data has no outlier rows")
        return inliers, outliers
    s = cfg["synthetic"]
    d = s["dim"]
    cov = np.full((d, d), s["correlation"]) + (1.0 - s["correlation"]) * np.eye(d)
    inliers = datasets.gen_gaussian(np.zeros(d), cov, s["n_inlier"], seed + 31,
                                    provenance="tabular_inliers")
    outliers = datasets.gen_gaussian(np.zeros(d), s["outlier_sd"], s["n_outlier"],
                                     seed + 32, provenance="tabular_outliers")
    return inliers, outliers


def run_tabular(cfg: dict) -> dict:
    out = _out_dir(cfg)
    seed = int(cfg["seed"])
    inliers, outliers = _tabular_data(cfg, seed)
    train_in, test_in = datasets.split(inliers, (1.0 - cfg["test_fraction"],
                                                 cfg["test_fraction"]), seed)
    contrastive = datasets.permute_marginals(train_in, seed + 33)
    fc = _flow_config(cfg)
    tc = _train_config(cfg, objective="contrastive")
    report = {}
    for m in cfg["methods"]:
        fitted = fit_method(m, train_in, contrastive, tc, seed, fc)
        s_in = fitted.score(test_in.data)
        s_out = fitted.score(outliers.data)
        sr = metrics.ScoreReport(m, s_in, s_out)
        sr.save_json(out / f"scores_{m}.json")
        report[m] = {"auroc": sr.auroc, "auroc_pct": 100.0 * sr.auroc}
    _write_json(out / "tabular_report.json", report)
    return report


# ---------------------------------------------------------------------------
# pipeline subcommands: train / score / eval / report

def run_train(cfg: dict) -> dict:
    out = _out_dir(cfg)
    if not cfg["data_path"]:
        raise ConfigError("train needs data_path")
    inl = datasets.load_features(cfg["data_path"])
    contr = None
    if cfg["contrastive_path"]:
        contr = datasets.load_features(cfg["contrastive_path"])
        if contr.dim != inl.dim:
            raise ConfigError(f"contrastive dim {contr.dim} != data dim {inl.dim}")
    objective = cfg["objective"]
    tc = _train_config(cfg, seed=cfg["seed"], objective=objective)
    model = flows.build_model(inl.dim, _flow_config(cfg), cfg["seed"])
    model, history = training.train(model, inl, contr, tc)
    flows.save_model(model, out / cfg["model_out"])
    history.save_json(out / cfg["history_out"])
    return {"model": str(out / cfg["model_out"]), "epochs": len(history.train_loss),
            "best_epoch": history.best_epoch}


def run_score(cfg: dict) -> dict:
    out = _out_dir(cfg)
    if not cfg["model_path"] or not cfg["data_path"]:
        raise ConfigError("score needs model_path and data_path")
    model = flows.load_model(cfg["model_path"])
    fs = datasets.load_features(cfg["data_path"])
    if fs.dim != model.dim:
        raise ConfigError(f"feature dim {fs.dim} != model dim {model.dim}")
    scores = metrics.outlier_score(model, fs.data)
    rows = []
    if fs.labels is not None:
        header = ["score", "label"]
        rows = [(float(s), int(l)) for s, l in zip(scores, fs.labels)]
    else:
        header = ["score"]
        rows = [(float(s),) for s in scores]
    _write_csv(out / cfg["scores_out"], header, rows)
    return {"n": fs.n, "scores": str(out / cfg["scores_out"])}


def _read_score_file(path) -> tuple[np.ndarray, np.ndarray | None]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if header[0] != "score":
            raise FormatError(f"{path}: expected a 'score' column first")
        has_label = len(header) > 1 and header[1] == "label"
        scores, labels = [], []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            scores.append(float(parts[0]))
            if has_label:
                labels.append(int(parts[1]))
    return np.array(scores), (np.array(labels) if has_label else None)


def run_eval(cfg: dict) -> dict:
    out = _out_dir(cfg)
    if cfg["inlier_scores"] and cfg["outlier_scores"]:
        s_in, _ = _read_score_file(cfg["inlier_scores"])
        s_out, _ = _read_score_file(cfg["outlier_scores"])
    elif cfg["inlier_scores"]:
        scores, labels = _read_score_file(cfg["inlier_scores"])
        if labels is None:
            raise ConfigError("single score file needs a label column")
        s_in = scores[labels == datasets.LABEL_INLIER]
        s_out = scores[labels != datasets.LABEL_INLIER]
    else:
        raise ConfigError("eval needs score files")
    sr = metrics.ScoreReport(cfg["method"], s_in, s_out, n_bins=cfg["n_bins"])
    result = sr.to_json_dict()
    if cfg["paired_a"] and cfg["paired_b"]:
        a, _ = _read_score_file(cfg["paired_a"])
        b, _ = _read_score_file(cfg["paired_b"])
        result["wilcoxon_p"] = metrics.wilcoxon_signed_rank(a, b)
    _write_json(out / cfg["report_out"], result)
    sr.save_roc_csv(out / cfg["roc_out"])
    sr.save_histogram_csv(out / cfg["hist_out"])
    return result


def run_report(cfg: dict) -> dict:
    out = _out_dir(cfg)
    seed = int(cfg["seed"])
    if cfg["class_paths"]:
        class_sets = [datasets.load_features(p) for p in cfg["class_paths"]]
        names = [Path(p).stem for p in cfg["class_paths"]]
        contrastive = (datasets.load_features(cfg["contrastive_path"])
                       if cfg["contrastive_path"] else None)
    else:
        s = cfg["synthetic"]
        d, k = s["dim"], s["n_classes"]
        if k > d:
            raise ConfigError("synthetic report needs n_classes <= dim")
        class_sets = [
            datasets.gen_gaussian(s["radius"] * np.eye(d)[i], s["cluster_sd"],
                                  s["n_per_class"], seed + 41 + i, provenance=f"class{i}")
            for i in range(k)
        ]
        names = [f"class{i}" for i in range(k)]
        contrastive = datasets.gen_gaussian(np.zeros(d), s["broad_sd"], s["n_broad"],
                                            seed + 40, provenance="broad")
    fc = _flow_config(cfg)
    tc = _train_config(cfg, objective="contrastive")
    summary = {}
    per_method_means = {}
    for m in cfg["methods"]:
        result = metrics.one_vs_rest(class_sets, m, tc, contrastive,
                                     root_seed=seed, test_fraction=cfg["test_fraction"],
                                     class_names=names, flow_config=fc)
        result.to_csv(out / f"confusion_{m}.csv")
        per_method_means[m] = result.row_means
        summary[m] = {
            "row_means_pct": [100.0 * v for v in result.row_means],
            "mean_pct": 100.0 * float(result.row_means.mean()),
        }
    if len(cfg["methods"]) >= 2:
        a, b = cfg["methods"][0], cfg["methods"][1]
        summary["wilcoxon"] = {
            "a": a, "b": b,
            "p_one_sided_a_gt_b": metrics.wilcoxon_signed_rank(
                per_method_means[a], per_method_means[b]),
        }
    _write_json(out / "report.json", summary)
    return summary


# ---------------------------------------------------------------------------
# argument parsing

RUNNERS = {
    "toy1d": run_toy1d,
    "toy2d": run_toy2d,
    "clamp-sweep": run_clamp_sweep,
    "mu-sweep": run_mu_sweep,
    "informed": run_mu_sweep,
    "tabular": run_tabular,
    "train": run_train,
    "score": run_score,
    "eval": run_eval,
    "report": run_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cnflow",
                                     description="contrastive flow experiment runner")
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in RUNNERS:
        p = sub.add_parser(kind)
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="root seed override")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--method", default=None,
                       help="comma-separated method list override")
        p.add_argument("--reps", type=int, default=None, help="repetitions override")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {"seed": args.seed, "out": args.out, "reps": args.reps}
    try:
        cfg = load_config(args.kind, args.config, overrides)
        if args.method is not None:
            if "methods" not in DEFAULTS[args.kind]:
                raise ConfigError(f"{args.kind} does not take --method")
            cfg["methods"] = args.method.split(",")
        result = RUNNERS[args.kind](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 1
    except (OSError, FormatError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    print(json.dumps(result) if not isinstance(result, (dict, list)) else
          json.dumps(result, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
