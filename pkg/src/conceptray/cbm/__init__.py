"""Two-stage concept-bottleneck pipeline: image -> concept scores -> label."""

from .concept_model import (
    ConceptModel,
    load_case_tensors,
    load_concept_model,
    save_concept_model,
    train_concept_predictor,
)
from .explain import explain_top2, intervene
from .heads import (
    HEAD_KINDS,
    LabelHead,
    dt_used_feature_indices,
    export_dt_text,
    load_label_head,
    predict_label,
    save_label_head,
    train_label_predictor,
)
from .types import ConceptScores, Explanation, LabelPrediction, TrainConfig

__all__ = [
    "ConceptModel",
    "ConceptScores",
    "Explanation",
    "HEAD_KINDS",
    "LabelHead",
    "LabelPrediction",
    "TrainConfig",
    "dt_used_feature_indices",
    "explain_top2",
    "export_dt_text",
    "intervene",
    "load_case_tensors",
    "load_concept_model",
    "load_label_head",
    "predict_label",
    "save_concept_model",
    "save_label_head",
    "train_concept_predictor",
]
