"""Shared value types of the two-stage concept/label pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class ConceptScores:
    """Per-concept confidence in [0, 1], in canonical lexicon order."""

    values: tuple[float, ...]
    lexicon_id: str

    def __post_init__(self):
        if any(not (0.0 <= v <= 1.0) for v in self.values):
            raise ValueError("concept scores must lie in [0, 1]")


@dataclass(frozen=True)
class LabelPrediction:
    """Predicted label with per-label scores.

    ``label`` is the argmax of ``class_scores`` with ties broken by lexicon
    label order. ``low_confidence`` marks degenerate inputs (uninformative
    concept scores or a tie at the top).
    """

    label: str
    class_scores: dict[str, float]
    head_kind: str
    low_confidence: bool = False


@dataclass(frozen=True)
class Explanation:
    """The two highest-scoring concepts, descending; ties by lexicon index."""

    case_id: str
    top_concepts: tuple[tuple[str, float], tuple[str, float]]

    def concept_ids(self) -> list[str]:
        return [cid for cid, _ in self.top_concepts]


@dataclass(frozen=True)
class TrainConfig:
    """Concept-predictor training hyperparameters."""

    backbone: str = "small"  # "small" (compact CNN) or "paper" (Inception-style)
    batch_size: int = 64
    learning_rate: float = 0.001
    epochs: int = 20
    seed: int = 0
    image_size: int = 64
    early_stop_patience: int = 5

    def validate(self) -> None:
        if self.backbone not in ("small", "paper"):
            raise ValueError(f"unknown backbone {self.backbone!r}")
        if self.batch_size <= 0 or self.learning_rate <= 0 or self.epochs <= 0:
            raise ValueError("batch_size, learning_rate, and epochs must be positive")
        if self.image_size <= 0:
            raise ValueError("image_size must be positive")

    def to_dict(self) -> dict:
        return {
            "backbone": self.backbone,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "seed": self.seed,
            "image_size": self.image_size,
            "early_stop_patience": self.early_stop_patience,
        }
