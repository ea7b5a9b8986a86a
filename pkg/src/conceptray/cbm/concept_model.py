"""Concept predictor: multi-label CNN with per-concept sigmoid outputs.

Trained on (image, binary concept vector) pairs by minimizing mean
per-concept binary cross-entropy. Training is seed-deterministic: model
init comes from ``torch.manual_seed``, batch order from a numpy generator
derived from the same seed, and torch's deterministic algorithms are
enforced.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from ..corpus import CaseRecord, ImageTensor, preprocess_image
from ..errors import ModelError, TrainingDivergedError
from ..lexicon import ConceptLexicon
from ..seeding import stage_seed
from .backbones import build_backbone
from .types import ConceptScores, TrainConfig

ARTIFACT_VERSION = 1


@dataclass
class ConceptModel:
    """A trained concept predictor plus the metadata needed to use it safely."""

    net: nn.Module
    lexicon_id: str
    concept_ids: tuple[str, ...]
    cfg: TrainConfig
    history: list[dict]

    def _check_image(self, pixels: np.ndarray) -> None:
        s = self.cfg.image_size
        if pixels.shape != (s, s):
            raise ModelError(f"image shape {pixels.shape} does not match model input {s}x{s}")

    def predict(self, image: ImageTensor | np.ndarray) -> ConceptScores:
        pixels = image.pixels if isinstance(image, ImageTensor) else np.asarray(image)
        self._check_image(pixels)
        scores = self.predict_batch(pixels[None, ...])[0]
        return ConceptScores(tuple(float(v) for v in scores), self.lexicon_id)

    def predict_batch(self, batch: np.ndarray) -> np.ndarray:
        """Sigmoid scores for a (N, S, S) stack; returns float64 (N, n_concepts)."""
        self.net.eval()
        with torch.no_grad():
            x = torch.from_numpy(np.ascontiguousarray(batch, dtype=np.float32)).unsqueeze(1)
            out = torch.sigmoid(self.net(x))
        return out.numpy().astype(np.float64)


def load_case_tensors(
    records: list[CaseRecord],
    image_size: int,
    base_dir: str | Path | None = None,
    require_vectors: bool = True,
    border_threshold: float | None = None,
) -> tuple[np.ndarray, np.ndarray | None, list[str]]:
    """Preprocess record images into a stack; optionally collect concept vectors."""
    from ..corpus import DEFAULT_BORDER_THRESHOLD

    threshold = DEFAULT_BORDER_THRESHOLD if border_threshold is None else border_threshold
    base = Path(base_dir) if base_dir is not None else None
    images, targets, case_ids = [], [], []
    for rec in records:
        path = Path(rec.image_path)
        if base is not None and not path.is_absolute():
            path = base / path
        images.append(
            preprocess_image(path, target_size=image_size, border_threshold=threshold).pixels
        )
        case_ids.append(rec.case_id)
        if require_vectors:
            if rec.concept_vector is None:
                raise ModelError(f"record {rec.case_id} has no concept vector")
            targets.append(rec.concept_vector.values)
    x = np.stack(images)
    y = np.asarray(targets, dtype=np.float32) if require_vectors else None
    return x, y, case_ids


def _top2_capture_f1(scores: np.ndarray, target: np.ndarray) -> float:
    """Micro F1 of the two highest-scoring concepts against the truth sets.

    Threshold-free: this is the same concept-capture measure the evaluation
    harness reports, so early stopping tracks the quantity that matters.
    """
    tp = fp = fn = 0
    for row, gt_row in zip(scores, target):
        pred = set(sorted(range(len(row)), key=lambda i: (-row[i], i))[:2])
        gt = set(int(i) for i in np.flatnonzero(gt_row))
        tp += len(pred & gt)
        fp += len(pred - gt)
        fn += len(gt - pred)
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom > 0 else 0.0


def train_concept_predictor(
    records: list[CaseRecord],
    cfg: TrainConfig,
    lex: ConceptLexicon,
    base_dir: str | Path | None = None,
    val_records: list[CaseRecord] | None = None,
    log: bool = False,
    border_threshold: float | None = None,
) -> ConceptModel:
    """Train the multi-label concept CNN; early-stops on validation concept F1."""
    cfg.validate()
    if not records:
        raise ModelError("no training records")
    for rec in records:
        if rec.concept_vector is None:
            raise ModelError(f"record {rec.case_id} has no concept vector")
        if rec.concept_vector.lexicon_id != lex.lexicon_id:
            raise ModelError(
                f"record {rec.case_id} was annotated with lexicon "
                f"{rec.concept_vector.lexicon_id}, expected {lex.lexicon_id}"
            )
    patterns = {rec.concept_vector.values for rec in records}
    if len(patterns) < 2:
        raise ModelError("training set has fewer than 2 distinct concept patterns")

    x_np, y_np, _ = load_case_tensors(
        records, cfg.image_size, base_dir, border_threshold=border_threshold
    )
    val = None
    if val_records:
        val = load_case_tensors(
            val_records, cfg.image_size, base_dir, border_threshold=border_threshold
        )

    torch.use_deterministic_algorithms(True)
    torch.manual_seed(cfg.seed)
    net = build_backbone(cfg.backbone, len(lex), cfg.image_size)
    optimizer = torch.optim.Adam(net.parameters(), lr=cfg.learning_rate)
    loss_fn = nn.BCEWithLogitsLoss()
    rng = np.random.default_rng(stage_seed(cfg.seed, "train-concepts-batches"))

    x = torch.from_numpy(x_np).unsqueeze(1)
    y = torch.from_numpy(y_np)
    n = x.shape[0]
    model = ConceptModel(net, lex.lexicon_id, tuple(lex.concept_ids), cfg, history=[])

    best_f1 = -1.0
    best_state = None
    stale = 0
    for epoch in range(cfg.epochs):
        net.train()
        order = rng.permutation(n)
        total = 0.0
        batches = 0
        for start in range(0, n, cfg.batch_size):
            idx = torch.from_numpy(order[start : start + cfg.batch_size].copy())
            optimizer.zero_grad()
            logits = net(x[idx])
            loss = loss_fn(logits, y[idx])
            if not torch.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch {batches} "
                    f"(lr={cfg.learning_rate}, batch_size={cfg.batch_size})"
                )
            loss.backward()
            optimizer.step()
            total += float(loss.detach())
            batches += 1
        entry = {"epoch": epoch, "train_loss": total / max(batches, 1)}

        if val is not None:
            vx, vy, _ = val
            f1 = _top2_capture_f1(model.predict_batch(vx), vy.astype(np.int64))
            entry["val_concept_f1"] = f1
            if f1 > best_f1 + 1e-12:
                best_f1 = f1
                best_state = {k: v.clone() for k, v in net.state_dict().items()}
                stale = 0
            else:
                stale += 1
        model.history.append(entry)
        if log:
            print(f"[train-concepts] {entry}")
        if val is not None and stale >= cfg.early_stop_patience:
            break

    if best_state is not None:
        net.load_state_dict(best_state)
    net.eval()
    return model


def save_concept_model(model: ConceptModel, path: str | Path) -> None:
    torch.save(
        {
            "format_version": ARTIFACT_VERSION,
            "kind": "concept_model",
            "lexicon_id": model.lexicon_id,
            "concept_ids": list(model.concept_ids),
            "cfg": model.cfg.to_dict(),
            "history": model.history,
            "state_dict": model.net.state_dict(),
        },
        Path(path),
    )


def load_concept_model(path: str | Path) -> ConceptModel:
    path = Path(path)
    if not path.exists():
        raise ModelError(f"concept model artifact not found: {path}")
    blob = torch.load(path, map_location="cpu", weights_only=False)
    if blob.get("kind") != "concept_model":
        raise ModelError(f"{path} is not a concept model artifact")
    cfg = TrainConfig(**blob["cfg"])
    net = build_backbone(cfg.backbone, len(blob["concept_ids"]), cfg.image_size)
    net.load_state_dict(blob["state_dict"])
    net.eval()
    return ConceptModel(
        net=net,
        lexicon_id=blob["lexicon_id"],
        concept_ids=tuple(blob["concept_ids"]),
        cfg=cfg,
        history=list(blob.get("history", [])),
    )
