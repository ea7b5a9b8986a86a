"""Dataset manifests, image preprocessing, and deterministic splits.

Manifests are JSON Lines, one case per line. Images are 8-bit grayscale
PNGs on disk; preprocessing crops black borders (edge rows/columns whose
mean intensity falls below a threshold), resizes to a square target with
bilinear interpolation, and min-max normalizes to [0, 1].
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from ._kernels import bilinear_resize
from .errors import ImageError, ManifestError
from .extraction import ConceptVector

SPLIT_NAMES = ("train", "val", "test")
DEFAULT_BORDER_THRESHOLD = 0.02
MIN_CROPPED_SIZE = 32


@dataclass(frozen=True)
class BBoxAnnotation:
    """Axis-aligned box in preprocessed-image pixel space, half-open on both axes."""

    label: str
    x0: int
    y0: int
    x1: int
    y1: int

    def validate(self, width: int | None = None, height: int | None = None) -> None:
        if not (0 <= self.x0 < self.x1 and 0 <= self.y0 < self.y1):
            raise ManifestError(f"degenerate bbox {self}")
        if width is not None and self.x1 > width:
            raise ManifestError(f"bbox {self} exceeds image width {width}")
        if height is not None and self.y1 > height:
            raise ManifestError(f"bbox {self} exceeds image height {height}")

    def to_dict(self) -> dict:
        return {"label": self.label, "x0": self.x0, "y0": self.y0, "x1": self.x1, "y1": self.y1}


@dataclass(frozen=True)
class CaseRecord:
    """One image/report pair with its label and optional annotations."""

    case_id: str
    image_path: str
    report_path: str
    label: str
    concept_vector: ConceptVector | None = None
    bboxes: tuple[BBoxAnnotation, ...] = ()
    split: str | None = None

    def with_concept_vector(self, vector: ConceptVector) -> "CaseRecord":
        return replace(self, concept_vector=vector)

    def with_split(self, split: str) -> "CaseRecord":
        if split not in SPLIT_NAMES:
            raise ManifestError(f"invalid split {split!r}")
        return replace(self, split=split)

    def to_dict(self) -> dict:
        obj: dict = {
            "case_id": self.case_id,
            "image_path": self.image_path,
            "report_path": self.report_path,
            "label": self.label,
        }
        if self.concept_vector is not None:
            obj["concept_vector"] = {
                "values": list(self.concept_vector.values),
                "lexicon_id": self.concept_vector.lexicon_id,
            }
        if self.bboxes:
            obj["bboxes"] = [b.to_dict() for b in self.bboxes]
        if self.split is not None:
            obj["split"] = self.split
        return obj


def _record_from_dict(obj: dict, line_no: int) -> CaseRecord:
    for key in ("case_id", "image_path", "report_path", "label"):
        if key not in obj:
            raise ManifestError(f"line {line_no}: missing field {key!r}")
    vector = None
    if "concept_vector" in obj and obj["concept_vector"] is not None:
        cv = obj["concept_vector"]
        vector = ConceptVector(tuple(int(v) for v in cv["values"]), cv["lexicon_id"])
    bboxes = tuple(
        BBoxAnnotation(b["label"], int(b["x0"]), int(b["y0"]), int(b["x1"]), int(b["y1"]))
        for b in obj.get("bboxes") or ()
    )
    for b in bboxes:
        b.validate()
    split = obj.get("split")
    if split is not None and split not in SPLIT_NAMES:
        raise ManifestError(f"line {line_no}: invalid split {split!r}")
    return CaseRecord(
        case_id=str(obj["case_id"]),
        image_path=str(obj["image_path"]),
        report_path=str(obj["report_path"]),
        label=str(obj["label"]),
        concept_vector=vector,
        bboxes=bboxes,
        split=split,
    )


def load_manifest(path: str | Path, valid_labels: tuple[str, ...] | None = None) -> list[CaseRecord]:
    """Parse a JSON Lines manifest; duplicate case ids and bad lines are fatal."""
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"manifest not found: {path}")
    records: list[CaseRecord] = []
    seen: set[str] = set()
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"line {line_no}: malformed JSON: {exc}") from exc
            rec = _record_from_dict(obj, line_no)
            if rec.case_id in seen:
                raise ManifestError(f"line {line_no}: duplicate case_id {rec.case_id!r}")
            seen.add(rec.case_id)
            if valid_labels is not None and rec.label not in valid_labels:
                raise ManifestError(f"line {line_no}: unknown label {rec.label!r}")
            records.append(rec)
    return records


def save_manifest(records: list[CaseRecord], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")


@dataclass(frozen=True)
class ImageTensor:
    """Square grayscale grid in [0, 1] plus the preprocessing provenance."""

    pixels: np.ndarray
    provenance: dict = field(default_factory=dict)


def _decode_image(source: str | Path | np.ndarray) -> tuple[np.ndarray, str]:
    if isinstance(source, np.ndarray):
        arr = source
        name = "<array>"
        if arr.ndim == 3:
            arr = arr[..., 0] * 0.299 + arr[..., 1] * 0.587 + arr[..., 2] * 0.114
        arr = arr.astype(np.float64)
        if arr.max() > 1.0:
            arr = arr / 255.0
        return np.clip(arr, 0.0, 1.0), name
    path = Path(source)
    try:
        with Image.open(path) as im:
            im = im.convert("F") if im.mode in ("L", "I", "F", "I;16") else im.convert("RGB")
            arr = np.asarray(im, dtype=np.float64)
    except (OSError, UnidentifiedImageError) as exc:
        raise ImageError(f"cannot decode image {path}: {exc}") from exc
    if arr.ndim == 3:
        arr = arr[..., 0] * 0.299 + arr[..., 1] * 0.587 + arr[..., 2] * 0.114
    if arr.max() > 1.0:
        arr = arr / 255.0
    return np.clip(arr, 0.0, 1.0), str(path)


def _crop_black_borders(arr: np.ndarray, threshold: float) -> tuple[np.ndarray, tuple[int, int, int, int]]:
    row_ok = arr.mean(axis=1) >= threshold
    col_ok = arr.mean(axis=0) >= threshold
    if not row_ok.any() or not col_ok.any():
        raise ImageError("image is entirely below the border threshold")
    y0 = int(np.argmax(row_ok))
    y1 = int(len(row_ok) - np.argmax(row_ok[::-1]))
    x0 = int(np.argmax(col_ok))
    x1 = int(len(col_ok) - np.argmax(col_ok[::-1]))
    return arr[y0:y1, x0:x1], (x0, y0, x1, y1)


def preprocess_image(
    source: str | Path | np.ndarray,
    target_size: int = 512,
    border_threshold: float = DEFAULT_BORDER_THRESHOLD,
) -> ImageTensor:
    """Crop black borders, resize to a square, min-max normalize to [0, 1].

    Border trimming moves inward from the edges only: the crop keeps the
    smallest rectangle whose edge rows/columns all have mean intensity at
    or above ``border_threshold``. A constant image normalizes to all
    zeros. Idempotent on its own output for images whose content rows stay
    above the threshold.
    """
    arr, name = _decode_image(source)
    cropped, crop_box = _crop_black_borders(arr, border_threshold)
    if cropped.shape[0] < MIN_CROPPED_SIZE or cropped.shape[1] < MIN_CROPPED_SIZE:
        raise ImageError(
            f"image {name} is {cropped.shape[1]}x{cropped.shape[0]} after border crop "
            f"(minimum {MIN_CROPPED_SIZE}x{MIN_CROPPED_SIZE})"
        )
    resized = bilinear_resize(cropped, target_size, target_size)
    lo = float(resized.min())
    hi = float(resized.max())
    if hi - lo <= 0.0:
        pixels = np.zeros_like(resized, dtype=np.float32)
    else:
        pixels = ((resized - lo) / (hi - lo)).astype(np.float32)
    provenance = {
        "source": name,
        "border_threshold": border_threshold,
        "crop_box": list(crop_box),
        "target_size": target_size,
        "prenorm_min": lo,
        "prenorm_max": hi,
    }
    return ImageTensor(pixels=pixels, provenance=provenance)


def save_image_png(pixels: np.ndarray, path: str | Path) -> None:
    """Write a [0,1] grayscale grid as an 8-bit PNG."""
    arr = np.clip(np.rint(np.asarray(pixels, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(Path(path), format="PNG")


def _round_half_away(x: float) -> int:
    return int(np.floor(x + 0.5)) if x >= 0 else -int(np.floor(-x + 0.5))


def _allocate(
    counts: dict[str, int], total_target: int, ratio: float, caps: dict[str, int] | None = None
) -> dict[str, int]:
    """Largest-remainder allocation of ``total_target`` seats across labels.

    Quotas come from the full per-label counts; ``caps`` (if given) bounds
    how many seats a label can still take.
    """
    caps = caps if caps is not None else dict(counts)
    quotas = {lab: n * ratio for lab, n in counts.items()}
    base = {lab: min(int(np.floor(q)), caps[lab]) for lab, q in quotas.items()}
    remaining = total_target - sum(base.values())
    order = sorted(counts, key=lambda lab: (-(quotas[lab] - base[lab]), lab))
    for lab in order:
        if remaining <= 0:
            break
        if base[lab] + 1 <= caps[lab]:
            base[lab] += 1
            remaining -= 1
    return base


def split_dataset(
    records: list[CaseRecord],
    ratios: tuple[int, int, int] = (80, 10, 10),
    seed: int = 0,
) -> list[CaseRecord]:
    """Assign train/val/test splits, stratified by label.

    Deterministic given the seed; per-label counts stay within one record
    of the exact ratio, and overall split sizes equal the rounded totals.
    """
    if sum(ratios) != 100:
        raise ValueError(f"ratios must sum to 100, got {ratios}")
    if not records:
        return []
    by_label: dict[str, list[int]] = {}
    for i, rec in enumerate(records):
        by_label.setdefault(rec.label, []).append(i)
    for label, idxs in by_label.items():
        if len(idxs) < 3:
            raise ManifestError(f"label {label!r} has only {len(idxs)} records (minimum 3)")

    rng = np.random.default_rng(seed)
    order = {lab: list(rng.permutation(idxs)) for lab, idxs in sorted(by_label.items())}
    counts = {lab: len(idxs) for lab, idxs in by_label.items()}
    n = len(records)
    n_test = _allocate(counts, _round_half_away(n * ratios[2] / 100), ratios[2] / 100)
    remaining = {lab: counts[lab] - n_test[lab] for lab in counts}
    n_val = _allocate(counts, _round_half_away(n * ratios[1] / 100), ratios[1] / 100, caps=remaining)

    assignment: dict[int, str] = {}
    for lab in sorted(by_label):
        idxs = order[lab]
        t, v = n_test[lab], n_val[lab]
        for i in idxs[:t]:
            assignment[int(i)] = "test"
        for i in idxs[t : t + v]:
            assignment[int(i)] = "val"
        for i in idxs[t + v :]:
            assignment[int(i)] = "train"
    return [rec.with_split(assignment[i]) for i, rec in enumerate(records)]
