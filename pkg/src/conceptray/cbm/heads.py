"""Label heads: decision tree, SVM, and MLP over concept vectors.

Independent two-stage training: heads are fit on ground-truth binary
concept vectors, while at inference they consume the concept predictor's
raw scores. That train/inference asymmetry is intentional and documented;
binary-trained trees split at 0.5, so well-separated scores route the same
way as the binaries they approximate.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import joblib
import numpy as np
from sklearn.neural_network import MLPClassifier
from sklearn.svm import SVC
from sklearn.tree import DecisionTreeClassifier, export_text

from ..errors import ModelError
from ..extraction import ConceptVector
from ..lexicon import ConceptLexicon
from .types import ConceptScores, LabelPrediction

HEAD_KINDS = ("dt", "svm", "mlp")
ARTIFACT_VERSION = 1
DEFAULT_DT_MAX_DEPTH = 12


@dataclass
class LabelHead:
    """A trained label predictor over concept vectors."""

    kind: str
    model: object
    lexicon_id: str
    labels: tuple[str, ...]
    n_features: int
    seed: int

    def class_scores(self, values: np.ndarray) -> np.ndarray:
        """Scores for all labels in lexicon order; absent classes score 0."""
        x = np.asarray(values, dtype=np.float64).reshape(1, -1)
        if x.shape[1] != self.n_features:
            raise ModelError(f"expected {self.n_features} concept values, got {x.shape[1]}")
        out = np.zeros(len(self.labels), dtype=np.float64)
        classes = np.asarray(self.model.classes_, dtype=np.int64)
        if self.kind == "svm":
            d = np.asarray(self.model.decision_function(x)).ravel()
            if len(classes) == 2:
                d = np.array([-d[0], d[0]])
            e = np.exp(d - d.max())
            out[classes] = e / e.sum()
        else:
            out[classes] = self.model.predict_proba(x)[0]
        return out


def train_label_predictor(
    vectors,
    labels,
    head_kind: str,
    lex: ConceptLexicon,
    seed: int = 0,
    dt_max_depth: int = DEFAULT_DT_MAX_DEPTH,
) -> LabelHead:
    """Fit one head on ground-truth concept vectors and their labels."""
    if head_kind not in HEAD_KINDS:
        raise ModelError(f"unknown head kind {head_kind!r}; expected one of {HEAD_KINDS}")
    rows = []
    for v in vectors:
        if isinstance(v, ConceptVector):
            if v.lexicon_id != lex.lexicon_id:
                raise ModelError(
                    f"concept vector lexicon {v.lexicon_id} does not match {lex.lexicon_id}"
                )
            rows.append(v.values)
        else:
            rows.append(tuple(v))
    x = np.asarray(rows, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != len(lex):
        raise ModelError(f"expected vectors of length {len(lex)}, got shape {x.shape}")
    if len(labels) != x.shape[0]:
        raise ModelError(f"{x.shape[0]} vectors but {len(labels)} labels")
    y = np.asarray([lex.label_index(lab) for lab in labels], dtype=np.int64)
    if len(np.unique(y)) < 2:
        raise ModelError("need at least 2 distinct labels to train a head")

    if head_kind == "dt":
        model = DecisionTreeClassifier(max_depth=dt_max_depth, random_state=seed)
    elif head_kind == "svm":
        model = SVC(kernel="rbf", C=1.0, decision_function_shape="ovr", random_state=seed)
    else:
        model = MLPClassifier(hidden_layer_sizes=(64,), max_iter=2000, random_state=seed)
    model.fit(x, y)
    return LabelHead(
        kind=head_kind,
        model=model,
        lexicon_id=lex.lexicon_id,
        labels=tuple(lex.labels),
        n_features=len(lex),
        seed=seed,
    )


def predict_label(head: LabelHead, scores: ConceptScores) -> LabelPrediction:
    """Deterministic label prediction from concept scores.

    Argmax over class scores, ties broken by lexicon label order. Flags
    ``low_confidence`` when the concept scores carry no information (all
    equal) or the top two class scores tie.
    """
    if scores.lexicon_id != head.lexicon_id:
        raise ModelError(
            f"scores lexicon {scores.lexicon_id} does not match head lexicon {head.lexicon_id}"
        )
    values = np.asarray(scores.values, dtype=np.float64)
    cls = head.class_scores(values)
    best = int(np.argmax(cls))
    top2 = np.sort(cls)[-2:] if len(cls) >= 2 else cls
    low_confidence = bool(
        (values.max() - values.min() < 1e-12)
        or (len(cls) >= 2 and top2[1] - top2[0] < 1e-12)
    )
    return LabelPrediction(
        label=head.labels[best],
        class_scores={lab: float(v) for lab, v in zip(head.labels, cls)},
        head_kind=head.kind.upper(),
        low_confidence=low_confidence,
    )


def save_label_head(head: LabelHead, path: str | Path) -> None:
    joblib.dump(
        {
            "format_version": ARTIFACT_VERSION,
            "kind": "label_head",
            "head_kind": head.kind,
            "lexicon_id": head.lexicon_id,
            "labels": list(head.labels),
            "n_features": head.n_features,
            "seed": head.seed,
            "model": head.model,
        },
        Path(path),
    )


def load_label_head(path: str | Path) -> LabelHead:
    path = Path(path)
    if not path.exists():
        raise ModelError(f"label head artifact not found: {path}")
    blob = joblib.load(path)
    if blob.get("kind") != "label_head":
        raise ModelError(f"{path} is not a label head artifact")
    return LabelHead(
        kind=blob["head_kind"],
        model=blob["model"],
        lexicon_id=blob["lexicon_id"],
        labels=tuple(blob["labels"]),
        n_features=int(blob["n_features"]),
        seed=int(blob["seed"]),
    )


def export_dt_text(head: LabelHead, lex: ConceptLexicon) -> str:
    """Readable decision-tree structure for audit."""
    if head.kind != "dt":
        raise ModelError(f"cannot export tree text for head kind {head.kind!r}")
    return export_text(head.model, feature_names=list(lex.concept_ids))


def dt_used_feature_indices(head: LabelHead) -> set[int]:
    """Concept indices the trained tree actually tests."""
    if head.kind != "dt":
        raise ModelError("used-feature probe applies to decision trees only")
    features = head.model.tree_.feature
    return {int(f) for f in features if f >= 0}
