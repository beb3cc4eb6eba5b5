"""Bayesian-network core: schema, scores, tree CPDs, search, inference."""

from .schema import CaseTable, Variable, sequential_split
from .scores import GaussianPrior, score_binary_gaussian_leaf, score_multinomial_leaf
from .model import BayesNet
from .search import SearchConfig, structure_search
from .infer import Forecast, predict
from .evaluate import evaluate_forecasts, prediction_success

__all__ = [
    "CaseTable",
    "Variable",
    "sequential_split",
    "GaussianPrior",
    "score_multinomial_leaf",
    "score_binary_gaussian_leaf",
    "BayesNet",
    "SearchConfig",
    "structure_search",
    "Forecast",
    "predict",
    "evaluate_forecasts",
    "prediction_success",
]
