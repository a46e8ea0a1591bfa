"""Random forest, nearest neighbours, gradient boosting and perceptron classifiers."""
from .models import (
    TrainedModel,
    fit,
    load_external_predictions,
    load_model,
    predict,
    predict_proba,
    save_model,
)
from .spec import DEFAULTS, KINDS, ClassifierSpec
from .trees import decision_path, fit_tree, tree_leaves, tree_predict

__all__ = [
    "ClassifierSpec", "DEFAULTS", "KINDS", "TrainedModel", "decision_path", "fit",
    "fit_tree", "load_external_predictions", "load_model", "predict", "predict_proba",
    "save_model", "tree_leaves", "tree_predict",
]
