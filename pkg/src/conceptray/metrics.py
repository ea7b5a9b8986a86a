"""Quantitative evaluation: agreement curves, bbox capture, PRF, expert scores.

Concept-set PRF is micro-averaged over (case, concept) pairs; the
predicted-set size per method (2 for the in-repo explainer, 5 or variable
for imported baselines) is recorded by callers in result metadata rather
than hidden here.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np

from .corpus import BBoxAnnotation
from .errors import MetricError
from .saliency import MaskFraction, SaliencyMap, mask_pixel_count, top_fraction_mask

DEFAULT_N_GRID = (1, 2, 5, 10, 15, 20, 30, 50)
EXPERT_SCORE_RANGE = (0, 1, 2, 3)


@dataclass(frozen=True)
class CurvePoint:
    n: float
    value: float

    def __post_init__(self):
        if not (0.0 <= self.value <= 1.0):
            raise MetricError(f"curve value {self.value} outside [0, 1]")


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float

    @staticmethod
    def from_counts(tp: int, fp: int, fn: int) -> "PRF":
        p = tp / (tp + fp) if tp + fp > 0 else 0.0
        r = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
        return PRF(p, r, f1)

    def to_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1}


@dataclass(frozen=True)
class ExpertScore:
    """One 0-3 clinical-relevance rating of one explanation by one rater."""

    case_id: str
    technique: str
    rater_id: str
    score: int
    timestamp: float
    notes: str = ""


def pairwise_overlap(map_a: SaliencyMap, map_b: SaliencyMap, n: float) -> float:
    """Fraction of shared pixels between the two top-n% masks (symmetric)."""
    if map_a.values.shape != map_b.values.shape:
        raise MetricError(
            f"map dims differ: {map_a.values.shape} vs {map_b.values.shape}"
        )
    k = mask_pixel_count(map_a.values.shape, n)
    inter = int(np.sum(top_fraction_mask(map_a, n) & top_fraction_mask(map_b, n)))
    return inter / k


def overlap_curve(
    maps_by_technique: dict[str, dict[str, SaliencyMap]],
    n_grid: tuple[float, ...] = DEFAULT_N_GRID,
    max_skip_fraction: float = 0.10,
) -> dict:
    """Mean pairwise overlap per technique pair at each n over a case set.

    Cases missing either map of a pair are skipped and counted; a pair with
    more than ``max_skip_fraction`` of cases missing fails the run.
    """
    techniques = sorted(maps_by_technique)
    if len(techniques) < 2:
        raise MetricError("overlap curves need at least 2 techniques")
    all_cases = sorted(set().union(*(maps_by_technique[t].keys() for t in techniques)))
    if not all_cases:
        raise MetricError("no cases provided")

    pairs = {}
    for t1, t2 in itertools.combinations(techniques, 2):
        sums = {n: 0.0 for n in n_grid}
        used = 0
        skipped = 0
        for case_id in all_cases:
            a = maps_by_technique[t1].get(case_id)
            b = maps_by_technique[t2].get(case_id)
            if a is None or b is None:
                skipped += 1
                continue
            used += 1
            for n in n_grid:
                sums[n] += pairwise_overlap(a, b, n)
        if skipped / len(all_cases) > max_skip_fraction:
            raise MetricError(
                f"pair ({t1}, {t2}): {skipped}/{len(all_cases)} cases missing a map"
            )
        points = [CurvePoint(float(n), sums[n] / used if used else 0.0) for n in n_grid]
        pairs[f"{t1}|{t2}"] = {
            "points": [{"n": p.n, "value": p.value} for p in points],
            "n_cases": used,
            "n_skipped": skipped,
        }
    return {"n_grid": [float(n) for n in n_grid], "pairs": pairs}


def bbox_capture(smap: SaliencyMap, bboxes: list[BBoxAnnotation], n: float) -> float:
    """Fraction of ground-truth bbox pixels inside the top-n% mask."""
    if not bboxes:
        raise MetricError("bbox_capture needs at least one bbox")
    h, w = smap.values.shape
    union = np.zeros((h, w), dtype=bool)
    for b in bboxes:
        if not (0 <= b.x0 < b.x1 <= w and 0 <= b.y0 < b.y1 <= h):
            raise MetricError(f"bbox {b} outside map dims {w}x{h}")
        union[b.y0 : b.y1, b.x0 : b.x1] = True
    mask = top_fraction_mask(smap, n)
    return int(np.sum(mask & union)) / int(np.sum(union))


def concept_set_prf(
    predicted_sets: list[set[str]],
    truth_sets: list[set[str]],
    valid_ids: set[str] | None = None,
) -> PRF:
    """Micro-averaged PRF over (case, concept) pairs."""
    if len(predicted_sets) != len(truth_sets):
        raise MetricError(
            f"{len(predicted_sets)} predictions vs {len(truth_sets)} truths"
        )
    if valid_ids is not None:
        stray = (set().union(*predicted_sets, *truth_sets, set())) - valid_ids
        if stray:
            raise MetricError(f"concept ids outside lexicon: {sorted(stray)[:5]}")
    tp = fp = fn = 0
    for pred, truth in zip(predicted_sets, truth_sets):
        tp += len(pred & truth)
        fp += len(pred - truth)
        fn += len(truth - pred)
    return PRF.from_counts(tp, fp, fn)


def label_prf(
    predictions: list[str], ground_truth: list[str], labels: tuple[str, ...]
) -> dict:
    """One-vs-rest PRF per class plus the unweighted macro average."""
    if len(predictions) != len(ground_truth):
        raise MetricError(f"{len(predictions)} predictions vs {len(ground_truth)} truths")
    label_set = set(labels)
    for value in itertools.chain(predictions, ground_truth):
        if value not in label_set:
            raise MetricError(f"label {value!r} not in schema {labels}")
    per_class: dict[str, PRF] = {}
    for lab in labels:
        tp = sum(1 for p, g in zip(predictions, ground_truth) if p == lab and g == lab)
        fp = sum(1 for p, g in zip(predictions, ground_truth) if p == lab and g != lab)
        fn = sum(1 for p, g in zip(predictions, ground_truth) if p != lab and g == lab)
        if tp + fn == 0:
            warnings.warn(f"label {lab!r} absent from ground truth; contributes 0 to macro")
        per_class[lab] = PRF.from_counts(tp, fp, fn)
    macro = PRF(
        float(np.mean([per_class[lab].precision for lab in labels])),
        float(np.mean([per_class[lab].recall for lab in labels])),
        float(np.mean([per_class[lab].f1 for lab in labels])),
    )
    return {"per_class": per_class, "macro": macro}


def effective_scores(scores: list[ExpertScore]) -> tuple[list[ExpertScore], int, int]:
    """Apply supersession and validity filtering to a score log.

    The latest timestamp per (case, technique, rater) wins; equal
    timestamps resolve to the later log entry. Returns
    (effective, n_superseded, n_rejected).
    """
    rejected = 0
    latest: dict[tuple[str, str, str], tuple[float, int, ExpertScore]] = {}
    considered = 0
    for position, s in enumerate(scores):
        if s.score not in EXPERT_SCORE_RANGE or int(s.score) != s.score:
            rejected += 1
            continue
        considered += 1
        key = (s.case_id, s.technique, s.rater_id)
        prev = latest.get(key)
        if prev is None or (s.timestamp, position) >= (prev[0], prev[1]):
            latest[key] = (s.timestamp, position, s)
    effective = [entry[2] for entry in latest.values()]
    effective.sort(key=lambda s: (s.case_id, s.technique, s.rater_id))
    return effective, considered - len(effective), rejected


def aggregate_expert_scores(
    scores: list[ExpertScore], cohort_of: dict[str, str]
) -> dict:
    """Per-technique, per-cohort histograms over the 0-3 score scale."""
    effective, superseded, rejected = effective_scores(scores)
    histograms: dict[str, dict[str, list[int]]] = {}
    totals: dict[str, int] = {}
    for s in effective:
        cohort = cohort_of.get(s.case_id, "other")
        hist = histograms.setdefault(s.technique, {})
        bucket = hist.setdefault(cohort, [0, 0, 0, 0])
        bucket[int(s.score)] += 1
        totals[s.technique] = totals.get(s.technique, 0) + 1
    return {
        "histograms": histograms,
        "totals": totals,
        "n_effective": len(effective),
        "n_superseded": superseded,
        "n_rejected": rejected,
    }


def cohort_for_label(label: str) -> str:
    """Review cohorts: lung-cancer cases are 'cancerous', healthy are 'healthy'."""
    if label == "Lung Cancer":
        return "cancerous"
    if label == "Healthy":
        return "healthy"
    return "other"
