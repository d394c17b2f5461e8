"""Fit-and-score dispatch for the method names used across experiments:
cf, cf_ft, nll_flow, flow_ratio, mse, mse_ratio."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from . import baselines
from .errors import ConfigError
from .flows import FlowConfig, build_model
from .metrics import outlier_score
from .training import TrainConfig, train

Array = np.ndarray

METHODS = ("cf", "cf_ft", "nll_flow", "flow_ratio", "mse", "mse_ratio")
CONTRASTIVE_METHODS = ("cf", "cf_ft", "flow_ratio", "mse_ratio")


@dataclass
class FittedMethod:
    name: str
    score: Callable[[Array], Array]
    models: dict


def fit_method(name: str, train_in, contrastive, cfg: TrainConfig,
               seed: int, flow_config: FlowConfig | None = None,
               val_contrastive=None) -> FittedMethod:
    if name not in METHODS:
        raise ConfigError(f"unknown method {name!r}; pick from {METHODS}")
    if name in CONTRASTIVE_METHODS and contrastive is None:
        raise ConfigError(f"method {name!r} needs a contrastive set")
    if flow_config is None:
        flow_config = FlowConfig()
    dim = train_in.data.shape[1]
    cfg = replace(cfg, seed=seed)

    if name == "mse":
        model = baselines.fit_mse(train_in)
        return FittedMethod(name, lambda x: baselines.mse_score(model, x), {"mse": model})
    if name == "mse_ratio":
        model = baselines.fit_mse(train_in, contrastive)
        return FittedMethod(name, lambda x: baselines.mse_ratio_score(model, x), {"mse": model})
    if name == "nll_flow":
        flow = build_model(dim, flow_config, seed)
        train(flow, train_in, contrastive, replace(cfg, objective="nll"),
              val_contrastive_set=val_contrastive)
        return FittedMethod(name, lambda x: outlier_score(flow, x), {"flow": flow})
    if name == "flow_ratio":
        # both component flows are plain density estimators with the same
        # validation-NLL stopping rule, so the degenerate case where both
        # train on the same distribution stays symmetric
        flow_in = build_model(dim, flow_config, seed)
        train(flow_in, train_in, None, replace(cfg, objective="nll"))
        flow_contr = build_model(dim, flow_config, seed + 1)
        train(flow_contr, contrastive, None, replace(cfg, objective="nll"))
        return FittedMethod(name, lambda x: baselines.ratio_score(flow_in, flow_contr, x),
                            {"flow_in": flow_in, "flow_contr": flow_contr})
    objective = "contrastive" if name == "cf" else "cf_ft"
    flow = build_model(dim, flow_config, seed)
    train(flow, train_in, contrastive, replace(cfg, objective=objective),
          val_contrastive_set=val_contrastive)
    return FittedMethod(name, lambda x: outlier_score(flow, x), {"flow": flow})
