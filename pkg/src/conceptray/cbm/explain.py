"""Top-2 concept explanations and concept intervention."""

from __future__ import annotations

from ..errors import UnknownConceptError
from ..lexicon import ConceptLexicon
from .heads import LabelHead, predict_label
from .types import ConceptScores, Explanation, LabelPrediction


def explain_top2(scores: ConceptScores, lex: ConceptLexicon, case_id: str = "") -> Explanation:
    """The two highest-scoring concepts, descending; ties resolved by lexicon index."""
    if len(lex) < 2:
        raise ValueError("explanations need a lexicon with at least 2 concepts")
    order = sorted(range(len(scores.values)), key=lambda i: (-scores.values[i], i))
    first, second = order[0], order[1]
    return Explanation(
        case_id=case_id,
        top_concepts=(
            (lex.concepts[first].id, float(scores.values[first])),
            (lex.concepts[second].id, float(scores.values[second])),
        ),
    )


def intervene(
    head: LabelHead,
    scores: ConceptScores,
    overrides: dict[str, int],
    lex: ConceptLexicon,
) -> tuple[ConceptScores, LabelPrediction]:
    """Replace chosen concept scores with expert-asserted binaries and re-predict.

    The input scores are not mutated; unknown concept ids and non-binary
    override values are rejected before anything is recomputed.
    """
    indexed: dict[int, float] = {}
    for cid, value in overrides.items():
        idx = lex.index_of(cid)  # raises UnknownConceptError
        if value not in (0, 1, 0.0, 1.0, True, False):
            raise ValueError(f"override for {cid!r} must be exactly 0 or 1, got {value!r}")
        indexed[idx] = float(value)
    new_values = tuple(
        indexed.get(i, v) for i, v in enumerate(scores.values)
    )
    new_scores = ConceptScores(new_values, scores.lexicon_id)
    return new_scores, predict_label(head, new_scores)
