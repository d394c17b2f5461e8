"""Contrastive training of normalizing flows for density-based outlier
detection: a numpy flow stack (permutation + affine coupling blocks), the
clamped contrastive objective, analytic oracles for the toy problems, and
AUROC/ROC evaluation tooling."""

from .datasets import FeatureSet, MixSpec, gen_gaussian, hypersphere_normalize, mix_datasets, permute_marginals, split
from .flows import FlowConfig, FlowModel, forward_latent, init_model, inverse, log_prob, sample
from .metrics import ScoreReport, auroc, outlier_score, roc_curve, wilcoxon_signed_rank
from .oracle import GaussianSpec, GridDensity, positive_difference, tv_distance
from .training import TrainConfig, TrainHistory, contrastive_objective, nll_objective, select_epsilon, train

__all__ = [
    "FeatureSet", "MixSpec", "gen_gaussian", "hypersphere_normalize",
    "mix_datasets", "permute_marginals", "split",
    "FlowConfig", "FlowModel", "forward_latent", "init_model", "inverse",
    "log_prob", "sample",
    "ScoreReport", "auroc", "outlier_score", "roc_curve", "wilcoxon_signed_rank",
    "GaussianSpec", "GridDensity", "positive_difference", "tv_distance",
    "TrainConfig", "TrainHistory", "contrastive_objective", "nll_objective",
    "select_epsilon", "train",
]

__version__ = "0.1.0"
