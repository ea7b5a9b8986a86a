"""Phantom corpus generator: images, templated reports, and exact ground truth.

Each case renders label-specific findings into a two-lung phantom image and
assembles a sectioned report from per-concept positive templates, with
optional negated decoy sentences mentioning concepts that are absent. The
rendered concept set uniquely determines the label (concepts never mix
across label groups), so a lookup table over concept sets is a perfect
label classifier and the extractor can be scored exactly against the
emitted truth sidecar.

Per-case generation is keyed by (seed, case index), so corpora are
bit-identical across runs and case order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import BBoxAnnotation, CaseRecord, save_image_png, save_manifest
from .errors import SynthgenError
from .lexicon import ConceptLexicon, default_lexicon

DEFAULT_LABEL_MIX = {
    "Healthy": 0.10,
    "Lung Cancer": 0.21,
    "Pneumonia": 0.21,
    "Pleural Effusion": 0.21,
    "Cardiomegaly": 0.06,
    "Pneumothorax": 0.21,
}

# Findings must beat the local background by at least this mean-intensity
# margin inside their bbox, so saliency methods have real signal to find.
CONTRAST_MARGIN = 0.08


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of one synthetic corpus."""

    n_cases: int
    image_size: int = 64
    label_mix: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_LABEL_MIX))
    negation_rate: float = 0.25
    seed: int = 0

    def validate(self, lex: ConceptLexicon) -> None:
        if self.n_cases <= 0:
            raise SynthgenError("n_cases must be positive")
        if self.image_size < 32:
            raise SynthgenError("image_size must be at least 32")
        if not (0.0 <= self.negation_rate <= 1.0):
            raise SynthgenError(f"negation_rate {self.negation_rate} outside [0, 1]")
        unknown = set(self.label_mix) - set(lex.labels)
        if unknown:
            raise SynthgenError(f"label_mix names unknown labels: {sorted(unknown)}")
        total = sum(self.label_mix.values())
        if total <= 0.0:
            raise SynthgenError("label_mix has zero probability for all labels")
        if abs(total - 1.0) > 1e-9:
            raise SynthgenError(f"label_mix sums to {total}, expected 1.0")


# --------------------------------------------------------------------------
# Report templates. Positive templates use lexicon phrases verbatim (plus
# paraphrase variants); sentences are audited by tests to mention exactly
# their own concept and to contain no negation trigger.
# --------------------------------------------------------------------------

POSITIVE_TEMPLATES: dict[str, list[str]] = {
    "unremarkable": ["The chest is unremarkable.", "The lungs are clear."],
    "mass": [
        "There is a large mass in the right upper lobe.",
        "A spiculated mass is identified on the right.",
    ],
    "nodule": [
        "There is a 1.5-cm nodule in the left mid zone.",
        "A pulmonary nodule is present on the left.",
    ],
    "irregular_hilum": [
        "There is an irregular hilum on the right.",
        "Hilar enlargement is present.",
    ],
    "adenopathy": [
        "Mediastinal lymphadenopathy is present.",
        "There is adenopathy along the mediastinum.",
    ],
    "irregular_parenchyma": [
        "There is irregular parenchyma in the left mid lung.",
        "Architectural distortion is present on the left.",
    ],
    "pneumonitis": [
        "Findings are consistent with pneumonitis in the left upper zone.",
        "There is pneumonitis in the left upper lung.",
    ],
    "consolidation": [
        "There is dense consolidation in the left lower lobe.",
        "Patchy airspace disease is present at the left base.",
    ],
    "infection": [
        "Findings are concerning for infection in the right lower lobe.",
        "There is an infectious process at the right base.",
    ],
    "opacities": [
        "There are patchy opacities in the right lung.",
        "There is hazy opacification on the right.",
    ],
    "effusion": [
        "There is a moderate pleural effusion on the right.",
        "A small effusion is present at the right base.",
    ],
    "fluid": [
        "There is layering pleural fluid at the left base.",
        "A fluid collection is present on the left.",
    ],
    "costophrenic_angle": [
        "There is blunting of the costophrenic angle on the right.",
        "Costophrenic blunting is present on the right.",
    ],
    "meniscus_sign": [
        "A meniscus sign is seen at the left base.",
        "There is a meniscus at the left costophrenic region.",
    ],
    "enlarged_heart": [
        "There is an enlarged heart.",
        "Cardiomegaly is present with an enlarged cardiac silhouette.",
    ],
    "absent_lung_markings": [
        "There are absent lung markings at the right apex.",
        "Absent lung markings are noted at the right apex.",
    ],
    "irregular_diaphragm": [
        "There is an irregular diaphragm on the left.",
        "An irregular hemidiaphragm is seen on the left.",
    ],
}

FILLER_SENTENCES = [
    "The trachea is midline.",
    "Visualized osseous structures are intact.",
    "The mediastinal contours are stable.",
]

DECOY_TEMPLATES = [
    "No {phrase} is identified.",
    "There is no {phrase}.",
    "No evidence of {phrase}.",
    "The examination is without {phrase}.",
]

# Phrase used when a concept appears as a negated decoy.
DECOY_PHRASES = {
    "unremarkable": None,  # never used as a decoy
    "costophrenic_angle": "costophrenic blunting",
    "absent_lung_markings": "absent lung markings",
}


def decoy_phrase(lex: ConceptLexicon, concept_id: str) -> str:
    override = DECOY_PHRASES.get(concept_id)
    return override if override else lex.concept(concept_id).phrases[0]


def label_for_concepts(concept_ids: list[str], lex: ConceptLexicon) -> str:
    """The label deterministically implied by a rendered concept set."""
    groups = {lex.concept(cid).label_group for cid in concept_ids}
    if len(groups) != 1:
        raise SynthgenError(f"concept set {concept_ids} spans label groups {sorted(groups)}")
    return groups.pop()


# --------------------------------------------------------------------------
# Image rendering
# --------------------------------------------------------------------------


def _grids(s: int) -> tuple[np.ndarray, np.ndarray]:
    yy, xx = np.mgrid[0:s, 0:s]
    return yy.astype(np.float64), xx.astype(np.float64)


def _ellipse_mask(s, cx, cy, ax, ay):
    yy, xx = _grids(s)
    return ((xx - cx * s) / (ax * s)) ** 2 + ((yy - cy * s) / (ay * s)) ** 2 <= 1.0


def _disc_mask(s, cx, cy, r):
    yy, xx = _grids(s)
    return (xx - cx * s) ** 2 + (yy - cy * s) ** 2 <= (r * s) ** 2


def _soft_blob(s, cx, cy, sigma):
    yy, xx = _grids(s)
    d2 = (xx - cx * s) ** 2 + (yy - cy * s) ** 2
    return np.exp(-d2 / (2.0 * (sigma * s) ** 2))


def _bbox_of(mask: np.ndarray) -> tuple[int, int, int, int]:
    ys, xs = np.nonzero(mask)
    return int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1


def _paint_bright(img, mask, value, rng, speckle=0.02):
    img[mask] = value + rng.normal(0.0, speckle, int(mask.sum()))


LEFT_LUNG = (0.30, 0.45, 0.16, 0.28)  # cx, cy, ax, ay as fractions of size
RIGHT_LUNG = (0.70, 0.45, 0.16, 0.28)


def _render_finding(concept_id: str, img: np.ndarray, rng: np.random.Generator) -> list[tuple]:
    """Paint one finding; returns the bbox list (one per rendered component)."""
    s = img.shape[0]
    j = lambda scale: float(rng.uniform(-scale, scale))  # noqa: E731 - terse jitter

    if concept_id == "mass":
        mask = _disc_mask(s, 0.70 + j(0.04), 0.40 + j(0.05), 0.085)
        _paint_bright(img, mask, 0.95, rng)
        return [_bbox_of(mask)]
    if concept_id == "nodule":
        mask = _disc_mask(s, 0.30 + j(0.04), 0.38 + j(0.05), 0.038)
        _paint_bright(img, mask, 0.92, rng)
        return [_bbox_of(mask)]
    if concept_id == "irregular_hilum":
        cx, cy = 0.585 + j(0.02), 0.44 + j(0.03)
        mask = _disc_mask(s, cx, cy, 0.045)
        yy, xx = _grids(s)
        for ang in (0.3, 1.4, 2.5, 3.6, 4.7):  # radiating spokes
            ex, ey = cx + 0.085 * np.cos(ang), cy + 0.085 * np.sin(ang)
            for t in np.linspace(0.0, 1.0, s // 2):
                px = int(round((cx + t * (ex - cx)) * s))
                py = int(round((cy + t * (ey - cy)) * s))
                if 1 <= px < s - 1 and 1 <= py < s - 1:
                    mask[py - 1 : py + 1, px - 1 : px + 1] = True
        _paint_bright(img, mask, 0.88, rng)
        return [_bbox_of(mask)]
    if concept_id == "adenopathy":
        boxes = []
        for cy in (0.34, 0.46, 0.58):
            mask = _disc_mask(s, 0.50 + j(0.02), cy + j(0.02), 0.028)
            _paint_bright(img, mask, 0.86, rng)
            boxes.append(_bbox_of(mask))
        return boxes
    if concept_id == "irregular_parenchyma":
        boxes = []
        for _ in range(4):
            x0 = 0.24 + float(rng.uniform(0, 0.10))
            y0 = 0.42 + float(rng.uniform(0, 0.12))
            ang = float(rng.uniform(0, np.pi))
            length = 0.09
            mask = np.zeros_like(img, dtype=bool)
            for t in np.linspace(0.0, 1.0, max(8, s // 4)):
                px = int(round((x0 + t * length * np.cos(ang)) * s))
                py = int(round((y0 + t * length * np.sin(ang)) * s))
                if 1 <= px < s - 1 and 1 <= py < s - 1:
                    mask[py - 1 : py + 1, px - 1 : px + 1] = True
            if mask.any():
                _paint_bright(img, mask, 0.82, rng)
                boxes.append(_bbox_of(mask))
        return boxes
    if concept_id == "pneumonitis":
        blob = _soft_blob(s, 0.30 + j(0.03), 0.27 + j(0.03), 0.05) * 0.42
        img += blob
        return [_bbox_of(blob > 0.15)]
    if concept_id == "consolidation":
        yy, xx = _grids(s)
        x0, y0 = 0.24 + j(0.02), 0.55 + j(0.02)
        mask = (xx >= x0 * s) & (xx <= (x0 + 0.13) * s) & (yy >= y0 * s) & (yy <= (y0 + 0.13) * s)
        _paint_bright(img, mask, 0.80, rng, speckle=0.03)
        return [_bbox_of(mask)]
    if concept_id == "infection":
        # Thick bright annulus (cavitating look): distinct from solid patches.
        yy, xx = _grids(s)
        cx, cy = (0.70 + j(0.02)) * s, (0.52 + j(0.03)) * s
        d = np.sqrt((xx - cx) ** 2 + (yy - cy) ** 2)
        mask = (d >= 0.045 * s) & (d <= 0.085 * s)
        _paint_bright(img, mask, 0.82, rng, speckle=0.03)
        return [_bbox_of(mask)]
    if concept_id == "opacities":
        boxes = []
        for _ in range(4):
            cx = float(rng.uniform(0.62, 0.78))
            cy = float(rng.uniform(0.28, 0.58))
            blob = _soft_blob(s, cx, cy, 0.024) * 0.40
            img += blob
            boxes.append(_bbox_of(blob > 0.15))
        return boxes
    if concept_id == "effusion":
        lung = _ellipse_mask(s, *RIGHT_LUNG)
        yy, _ = _grids(s)
        mask = lung & (yy >= (0.60 + j(0.02)) * s)
        _paint_bright(img, mask, 0.85, rng)
        return [_bbox_of(mask)]
    if concept_id == "fluid":
        lung = _ellipse_mask(s, *LEFT_LUNG)
        yy, _ = _grids(s)
        y0 = 0.60 + j(0.02)
        mask = lung & (yy >= y0 * s) & (yy <= (y0 + 0.10) * s)
        _paint_bright(img, mask, 0.80, rng)
        return [_bbox_of(mask)]
    if concept_id == "costophrenic_angle":
        yy, xx = _grids(s)
        x0, y0, wd, ht = 0.76 + j(0.01), 0.66 + j(0.01), 0.10, 0.10
        box = (xx >= x0 * s) & (xx <= (x0 + wd) * s) & (yy >= y0 * s) & (yy <= (y0 + ht) * s)
        mask = box & ((xx - x0 * s) / (wd * s) + (yy - y0 * s) / (ht * s) >= 1.0)
        _paint_bright(img, mask, 0.86, rng)
        return [_bbox_of(mask)]
    if concept_id == "meniscus_sign":
        yy, xx = _grids(s)
        cx, cy = (0.30 + j(0.02)) * s, (0.70 + j(0.02)) * s
        d = np.sqrt((xx - cx) ** 2 + (yy - cy) ** 2)
        mask = (d >= 0.095 * s) & (d <= 0.125 * s) & (yy <= cy)
        _paint_bright(img, mask, 0.85, rng)
        return [_bbox_of(mask)]
    if concept_id == "enlarged_heart":
        mask = _ellipse_mask(s, 0.50 + j(0.02), 0.60 + j(0.02), 0.215, 0.17)
        _paint_bright(img, mask, 0.72, rng, speckle=0.03)
        return [_bbox_of(mask)]
    if concept_id == "absent_lung_markings":
        lung = _ellipse_mask(s, *RIGHT_LUNG)
        yy, _ = _grids(s)
        mask = lung & (yy <= (0.32 + j(0.02)) * s)
        img[mask] = 0.08
        return [_bbox_of(mask)]
    if concept_id == "irregular_diaphragm":
        yy, xx = _grids(s)
        mask = np.zeros_like(img, dtype=bool)
        phase = float(rng.uniform(0, np.pi))
        for px in range(int(0.18 * s), int(0.44 * s)):
            py = int(round((0.70 + 0.025 * np.sin(0.55 * px + phase)) * s))
            if 1 <= py < s - 1:
                mask[py - 1 : py + 2, px] = True
        _paint_bright(img, mask, 0.86, rng)
        return [_bbox_of(mask)]
    raise SynthgenError(f"no renderer for concept {concept_id!r}")


def render_case_image(
    concept_ids: list[str], image_size: int, rng: np.random.Generator
) -> tuple[np.ndarray, list[BBoxAnnotation]]:
    """Phantom image with the given findings rendered; returns (image, bboxes)."""
    s = image_size
    img = 0.12 + rng.normal(0.0, 0.03, (s, s))
    for lung in (LEFT_LUNG, RIGHT_LUNG):
        mask = _ellipse_mask(s, *lung)
        img[mask] = 0.45 + rng.normal(0.0, 0.04, int(mask.sum()))
    bboxes: list[BBoxAnnotation] = []
    for cid in concept_ids:
        if cid == "unremarkable":
            continue
        for x0, y0, x1, y1 in _render_finding(cid, img, rng):
            bboxes.append(BBoxAnnotation(label=cid, x0=x0, y0=y0, x1=x1, y1=y1))
    return np.clip(img, 0.0, 1.0), bboxes


# --------------------------------------------------------------------------
# Report assembly
# --------------------------------------------------------------------------


def _choose_concepts(label: str, lex: ConceptLexicon, rng: np.random.Generator) -> list[str]:
    group = [c.id for c in lex.concepts_for_label(label)]
    if len(group) <= 2:
        chosen = group
    else:
        picks = rng.choice(len(group), size=2, replace=False)
        chosen = [group[int(i)] for i in picks]
    order = {c.id: i for i, c in enumerate(lex.concepts)}
    return sorted(chosen, key=order.__getitem__)


def build_report(
    concept_ids: list[str],
    lex: ConceptLexicon,
    rng: np.random.Generator,
    negation_rate: float,
) -> str:
    findings = [FILLER_SENTENCES[int(rng.integers(len(FILLER_SENTENCES)))]]
    for cid in concept_ids:
        variants = POSITIVE_TEMPLATES[cid]
        findings.append(variants[int(rng.integers(len(variants)))])

    closer_cid = concept_ids[int(rng.integers(len(concept_ids)))]
    if closer_cid == "unremarkable":
        impression = ["Unremarkable examination."]
    else:
        impression = [
            f"Findings are most consistent with {lex.concept(closer_cid).phrases[0]}."
        ]

    if negation_rate > 0 and rng.random() < negation_rate:
        pool = [
            c.id
            for c in lex.concepts
            if c.id not in concept_ids and c.id != "unremarkable"
        ]
        n_decoys = int(rng.integers(1, 3))
        picks = rng.choice(len(pool), size=min(n_decoys, len(pool)), replace=False)
        for p in picks:
            cid = pool[int(p)]
            template = DECOY_TEMPLATES[int(rng.integers(len(DECOY_TEMPLATES)))]
            impression.append(template.format(phrase=decoy_phrase(lex, cid)))

    return "FINDINGS: " + " ".join(findings) + "\n\nIMPRESSION: " + " ".join(impression) + "\n"


# --------------------------------------------------------------------------
# Corpus generation
# --------------------------------------------------------------------------


def generate_case(
    index: int, spec: SynthSpec, lex: ConceptLexicon
) -> tuple[str, np.ndarray, str, list[str], str, list[BBoxAnnotation]]:
    """One case keyed by (seed, index): (case_id, image, report, concepts, label, bboxes)."""
    rng = np.random.default_rng([spec.seed, index])
    labels = [lab for lab in lex.labels if spec.label_mix.get(lab, 0.0) > 0.0]
    probs = np.array([spec.label_mix[lab] for lab in labels], dtype=np.float64)
    probs = probs / probs.sum()
    label = labels[int(rng.choice(len(labels), p=probs))]
    concept_ids = _choose_concepts(label, lex, rng)
    image, bboxes = render_case_image(concept_ids, spec.image_size, rng)
    report = build_report(concept_ids, lex, rng, spec.negation_rate)
    return f"c{index:05d}", image, report, concept_ids, label, bboxes


def generate_corpus(
    spec: SynthSpec, out_dir: str | Path, lex: ConceptLexicon | None = None
) -> Path:
    """Write images, reports, manifest, and the truth sidecar; returns manifest path."""
    lex = lex if lex is not None else default_lexicon()
    spec.validate(lex)
    out = Path(out_dir)
    try:
        (out / "images").mkdir(parents=True, exist_ok=True)
        (out / "reports").mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise SynthgenError(f"cannot create output directory {out}: {exc}") from exc

    records: list[CaseRecord] = []
    truth_lines: list[str] = []
    for index in range(spec.n_cases):
        case_id, image, report, concept_ids, label, bboxes = generate_case(index, spec, lex)
        image_rel = f"images/{case_id}.png"
        report_rel = f"reports/{case_id}.txt"
        try:
            save_image_png(image, out / image_rel)
            (out / report_rel).write_text(report, encoding="utf-8")
        except OSError as exc:
            raise SynthgenError(f"cannot write case {case_id}: {exc}") from exc
        records.append(
            CaseRecord(
                case_id=case_id,
                image_path=image_rel,
                report_path=report_rel,
                label=label,
                bboxes=tuple(bboxes),
            )
        )
        values = tuple(1 if c.id in concept_ids else 0 for c in lex.concepts)
        truth_lines.append(
            json.dumps(
                {
                    "case_id": case_id,
                    "concept_values": list(values),
                    "lexicon_id": lex.lexicon_id,
                    "label": label,
                    "bboxes": [b.to_dict() for b in bboxes],
                },
                sort_keys=True,
            )
        )

    manifest_path = out / "manifest.jsonl"
    save_manifest(records, manifest_path)
    (out / "truth.jsonl").write_text("\n".join(truth_lines) + "\n", encoding="utf-8")
    return manifest_path


def load_truth(path: str | Path) -> dict[str, dict]:
    """Read a truth sidecar into a case_id -> entry mapping."""
    truth: dict[str, dict] = {}
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                entry = json.loads(line)
                truth[entry["case_id"]] = entry
    return truth
