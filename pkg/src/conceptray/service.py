"""HTTP facade for the review console.

Serves case listings, on-demand explanations, concept intervention
what-ifs, and owns the expert-score log. The log is append-only JSON
Lines: every acknowledged submission is flushed and fsynced before the
response goes out, and the in-memory index is rebuilt from the log at
startup, so restarts never lose acknowledged scores.

Configuration comes from ``ServiceConfig``; the ``serve`` CLI subcommand
maps flags and ``CONCEPTRAY_*`` environment variables onto it.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import FileResponse, JSONResponse

from .cbm import (
    ConceptScores,
    explain_top2,
    intervene,
    load_concept_model,
    load_label_head,
    predict_label,
)
from .corpus import DEFAULT_BORDER_THRESHOLD, load_manifest, preprocess_image
from .errors import ConceptrayError, UnknownConceptError
from .lexicon import default_lexicon, load_lexicon
from .metrics import ExpertScore, aggregate_expert_scores, cohort_for_label
from .synthgen import load_truth

VALID_COHORTS = ("cancerous", "healthy", "other")
VALID_STATUSES = ("scored", "unscored")


@dataclass
class ServiceConfig:
    manifest_path: str
    base_dir: str | None = None
    head_path: str | None = None
    concept_model_path: str | None = None
    concept_source: str = "model"  # "model" or "truth"
    truth_path: str | None = None
    score_log_path: str = "scores.jsonl"
    lexicon_path: str | None = None
    unblind: bool = False
    page_size: int = 20
    border_threshold: float | None = None

    @staticmethod
    def from_env(**overrides) -> "ServiceConfig":
        env = os.environ
        values = dict(
            manifest_path=env.get("CONCEPTRAY_MANIFEST", ""),
            base_dir=env.get("CONCEPTRAY_BASE_DIR"),
            head_path=env.get("CONCEPTRAY_LABEL_HEAD"),
            concept_model_path=env.get("CONCEPTRAY_CONCEPT_MODEL"),
            concept_source=env.get("CONCEPTRAY_CONCEPT_SOURCE", "model"),
            truth_path=env.get("CONCEPTRAY_TRUTH"),
            score_log_path=env.get("CONCEPTRAY_SCORE_LOG", "scores.jsonl"),
            lexicon_path=env.get("CONCEPTRAY_LEXICON"),
            unblind=env.get("CONCEPTRAY_UNBLIND", "") not in ("", "0", "false"),
            border_threshold=(
                float(env["CONCEPTRAY_BORDER_THRESHOLD"])
                if env.get("CONCEPTRAY_BORDER_THRESHOLD")
                else None
            ),
        )
        values.update({k: v for k, v in overrides.items() if v is not None})
        return ServiceConfig(**values)


class ScoreStore:
    """Append-only JSONL score log with an in-memory index.

    Writes are serialized through one lock and fsynced before the record id
    is returned. Duplicate client tokens return the original record id
    without appending.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._records: list[dict] = []
        self._by_token: dict[str, dict] = {}
        if self.path.exists():
            with self.path.open(encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        rec = json.loads(line)
                        self._records.append(rec)
                        token = rec.get("client_token")
                        if token:
                            self._by_token.setdefault(token, rec)

    def append(self, record: dict) -> tuple[dict, bool]:
        """Durably append; returns (stored record, was_duplicate)."""
        with self._lock:
            token = record.get("client_token")
            if token and token in self._by_token:
                return self._by_token[token], True
            record = dict(record)
            record["record_id"] = f"s{len(self._records):08d}"
            line = json.dumps(record, sort_keys=True)
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")
                fh.flush()
                os.fsync(fh.fileno())
            self._records.append(record)
            if token:
                self._by_token[token] = record
            return record, False

    def all_scores(self) -> list[ExpertScore]:
        return [
            ExpertScore(
                case_id=r["case_id"],
                technique=r["technique"],
                rater_id=r["rater_id"],
                score=int(r["score"]),
                timestamp=float(r["timestamp"]),
                notes=r.get("notes", ""),
            )
            for r in self._records
        ]

    def line_count(self) -> int:
        return len(self._records)

    def scored_keys(self) -> set[tuple[str, str, str]]:
        return {(r["case_id"], r["technique"], r["rater_id"]) for r in self._records}


def _error(status: int, code: str, message: str, detail: str = "") -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"code": code, "message": message, "detail": detail},
    )


def create_app(config: ServiceConfig) -> FastAPI:
    lex = load_lexicon(config.lexicon_path) if config.lexicon_path else default_lexicon()
    base = Path(config.base_dir) if config.base_dir else Path(config.manifest_path).parent
    records = load_manifest(config.manifest_path, valid_labels=tuple(lex.labels))
    cases = {rec.case_id: rec for rec in records}
    ordered_ids = sorted(cases)

    head = load_label_head(config.head_path) if config.head_path else None
    concept_model = None
    truth = None
    if config.concept_source == "model":
        if not config.concept_model_path:
            raise ConceptrayError("concept_source=model requires a concept model artifact")
        concept_model = load_concept_model(config.concept_model_path)
    elif config.concept_source == "truth":
        truth_path = config.truth_path or str(Path(config.manifest_path).parent / "truth.jsonl")
        truth = load_truth(truth_path)
    else:
        raise ConceptrayError(f"unknown concept_source {config.concept_source!r}")

    store = ScoreStore(config.score_log_path)
    score_cache: dict[str, ConceptScores] = {}
    cache_lock = threading.Lock()

    def image_path(case_id: str) -> Path:
        p = Path(cases[case_id].image_path)
        return p if p.is_absolute() else base / p

    def concept_scores_for(case_id: str) -> ConceptScores:
        with cache_lock:
            cached = score_cache.get(case_id)
        if cached is not None:
            return cached
        if concept_model is not None:
            image = preprocess_image(
                image_path(case_id),
                concept_model.cfg.image_size,
                border_threshold=(
                    config.border_threshold
                    if config.border_threshold is not None
                    else DEFAULT_BORDER_THRESHOLD
                ),
            )
            scores = concept_model.predict(image)
        else:
            entry = truth.get(case_id)
            if entry is None:
                raise ConceptrayError(f"case {case_id} missing from truth sidecar")
            scores = ConceptScores(
                tuple(float(v) for v in entry["concept_values"]), entry["lexicon_id"]
            )
        with cache_lock:
            score_cache[case_id] = scores
        return scores

    def case_view(case_id: str) -> dict:
        rec = cases[case_id]
        scores = concept_scores_for(case_id)
        explanation = explain_top2(scores, lex, case_id=case_id)
        view = {
            "case_id": case_id,
            "image_url": f"/images/{case_id}",
            "cohort": cohort_for_label(rec.label),
            "concept_scores": [
                {"concept_id": c.id, "display_name": c.display_name, "score": v}
                for c, v in zip(lex.concepts, scores.values)
            ],
            "explanation": [
                {"concept_id": cid, "score": score}
                for cid, score in explanation.top_concepts
            ],
            "scored_techniques": sorted(
                {r[1] for r in store.scored_keys() if r[0] == case_id}
            ),
        }
        if head is not None:
            pred = predict_label(head, scores)
            view["label_prediction"] = {
                "label": pred.label,
                "class_scores": pred.class_scores,
                "head_kind": pred.head_kind,
                "low_confidence": pred.low_confidence,
            }
        if config.unblind:
            view["ground_truth_label"] = rec.label
        return view

    app = FastAPI(title="conceptray review service")
    app.state.store = store
    app.state.config = config

    @app.exception_handler(ConceptrayError)
    async def _domain_error(request: Request, exc: ConceptrayError):
        return _error(500, "internal_error", str(exc))

    @app.get("/cases")
    def list_cases(
        cohort: str | None = None,
        status: str | None = None,
        technique: str | None = None,
        rater_id: str | None = None,
        page: int = 1,
        page_size: int | None = None,
    ):
        if cohort is not None and cohort not in VALID_COHORTS:
            return _error(400, "bad_filter", f"cohort must be one of {VALID_COHORTS}")
        if status is not None and status not in VALID_STATUSES:
            return _error(400, "bad_filter", f"status must be one of {VALID_STATUSES}")
        if page < 1:
            return _error(400, "bad_filter", "page must be >= 1")
        size = page_size or config.page_size
        if size < 1:
            return _error(400, "bad_filter", "page_size must be >= 1")

        scored = store.scored_keys()

        def is_scored(case_id: str) -> bool:
            for cid, tech, rater in scored:
                if cid != case_id:
                    continue
                if technique is not None and tech != technique:
                    continue
                if rater_id is not None and rater != rater_id:
                    continue
                return True
            return False

        selected = []
        for case_id in ordered_ids:
            rec = cases[case_id]
            if cohort is not None and cohort_for_label(rec.label) != cohort:
                continue
            case_scored = is_scored(case_id)
            if status == "scored" and not case_scored:
                continue
            if status == "unscored" and case_scored:
                continue
            selected.append(
                {
                    "case_id": case_id,
                    "cohort": cohort_for_label(rec.label),
                    "scored": case_scored,
                    "image_url": f"/images/{case_id}",
                }
            )
        start = (page - 1) * size
        return {
            "cases": selected[start : start + size],
            "page": page,
            "page_size": size,
            "total": len(selected),
        }

    @app.get("/cases/{case_id}")
    def get_case(case_id: str):
        if case_id not in cases:
            return _error(404, "not_found", f"unknown case {case_id!r}")
        return case_view(case_id)

    @app.post("/cases/{case_id}/score")
    def post_score(case_id: str, submission: dict):
        if case_id not in cases:
            return _error(404, "not_found", f"unknown case {case_id!r}")
        technique = submission.get("technique")
        rater = submission.get("rater_id")
        score = submission.get("score")
        if not technique or not rater:
            return _error(400, "bad_submission", "technique and rater_id are required")
        if not isinstance(score, int) or isinstance(score, bool) or score not in (0, 1, 2, 3):
            return _error(400, "bad_score", f"score must be an integer in [0, 3], got {score!r}")
        record = {
            "case_id": case_id,
            "technique": technique,
            "rater_id": rater,
            "score": score,
            "notes": submission.get("notes", ""),
            "timestamp": time.time(),
        }
        token = submission.get("client_token")
        if token:
            record["client_token"] = token
        stored, duplicate = store.append(record)
        return {"record_id": stored["record_id"], "duplicate": duplicate}

    @app.post("/cases/{case_id}/intervene")
    def post_intervene(case_id: str, body: dict):
        if case_id not in cases:
            return _error(404, "not_found", f"unknown case {case_id!r}")
        if head is None:
            return _error(400, "no_head", "service started without a label head artifact")
        overrides = body.get("overrides") or {}
        scores = concept_scores_for(case_id)
        pre = predict_label(head, scores)
        try:
            new_scores, post = intervene(head, scores, overrides, lex)
        except UnknownConceptError as exc:
            return _error(400, "unknown_concept", str(exc))
        except ValueError as exc:
            return _error(400, "bad_override", str(exc))
        return {
            "case_id": case_id,
            "overrides": overrides,
            "pre": {"label": pre.label, "class_scores": pre.class_scores},
            "post": {"label": post.label, "class_scores": post.class_scores},
            "pre_explanation": [
                {"concept_id": cid, "score": s}
                for cid, s in explain_top2(scores, lex, case_id).top_concepts
            ],
            "post_explanation": [
                {"concept_id": cid, "score": s}
                for cid, s in explain_top2(new_scores, lex, case_id).top_concepts
            ],
        }

    @app.get("/metrics/expert-scores")
    def expert_scores():
        cohorts = {cid: cohort_for_label(rec.label) for cid, rec in cases.items()}
        return aggregate_expert_scores(store.all_scores(), cohorts)

    @app.get("/images/{case_id}")
    def get_image(case_id: str):
        if case_id not in cases:
            return _error(404, "not_found", f"unknown case {case_id!r}")
        path = image_path(case_id)
        if not path.exists():
            return _error(404, "not_found", f"image file missing for case {case_id!r}")
        return FileResponse(path, media_type="image/png")

    return app
