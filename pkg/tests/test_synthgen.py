import hashlib
from pathlib import Path

import numpy as np
import pytest

from conceptray.corpus import load_manifest, preprocess_image
from conceptray.errors import SynthgenError
from conceptray.extraction import (
    default_negation_triggers,
    extract_from_text,
    normalize_sentences,
)
from conceptray.metrics import concept_set_prf
from conceptray.synthgen import (
    CONTRAST_MARGIN,
    DECOY_TEMPLATES,
    FILLER_SENTENCES,
    POSITIVE_TEMPLATES,
    SynthSpec,
    decoy_phrase,
    generate_corpus,
    label_for_concepts,
    load_truth,
)


def corpus_digest(directory: Path) -> str:
    h = hashlib.sha256()
    for p in sorted(Path(directory).rglob("*")):
        if p.is_file() and not p.name.startswith("run_manifest"):
            h.update(p.name.encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def test_spec_validation(lex):
    with pytest.raises(SynthgenError, match="zero probability"):
        SynthSpec(n_cases=1, label_mix={"Healthy": 0.0}).validate(lex)
    with pytest.raises(SynthgenError, match="negation_rate"):
        SynthSpec(n_cases=1, negation_rate=1.5).validate(lex)
    with pytest.raises(SynthgenError, match="unknown labels"):
        SynthSpec(n_cases=1, label_mix={"Zebra": 1.0}).validate(lex)
    with pytest.raises(SynthgenError, match="sums to"):
        SynthSpec(n_cases=1, label_mix={"Healthy": 0.4}).validate(lex)


def test_unwritable_directory(lex):
    spec = SynthSpec(n_cases=1, label_mix={"Healthy": 1.0})
    with pytest.raises(SynthgenError):
        generate_corpus(spec, "/proc/cannot/write/here", lex)


def test_healthy_case_contract(tmp_path, lex):
    spec = SynthSpec(n_cases=1, image_size=64, label_mix={"Healthy": 1.0}, seed=4)
    manifest = generate_corpus(spec, tmp_path, lex)
    rec = load_manifest(manifest)[0]
    assert rec.label == "Healthy"
    assert rec.bboxes == ()
    report = (tmp_path / rec.report_path).read_text()
    assert "unremarkable" in report.lower() or "clear" in report.lower()
    truth = load_truth(tmp_path / "truth.jsonl")[rec.case_id]
    values = truth["concept_values"]
    assert values[lex.index_of("unremarkable")] == 1
    assert sum(values) == 1


def test_negation_rate_zero_no_triggers(tmp_path, lex):
    spec = SynthSpec(n_cases=40, image_size=64, negation_rate=0.0, seed=9)
    manifest = generate_corpus(spec, tmp_path, lex)
    trigger_seqs = [tuple(normalize_sentences(t + ".")[0].split()) for t in default_negation_triggers()]
    for rec in load_manifest(manifest):
        text = (tmp_path / rec.report_path).read_text()
        for sentence in normalize_sentences(text.replace("FINDINGS:", "").replace("IMPRESSION:", "")):
            tokens = sentence.split()
            for seq in trigger_seqs:
                for i in range(len(tokens) - len(seq) + 1):
                    assert tuple(tokens[i : i + len(seq)]) != seq, (rec.case_id, sentence)


def test_bit_identical_regeneration(tmp_path, lex):
    spec = SynthSpec(n_cases=30, image_size=64, negation_rate=0.4, seed=123)
    d1, d2 = tmp_path / "a", tmp_path / "b"
    generate_corpus(spec, d1, lex)
    generate_corpus(spec, d2, lex)
    assert corpus_digest(d1) == corpus_digest(d2)


def test_extraction_closure_f1_is_one(small_corpus, lex):
    pred, truth = [], []
    for rec in small_corpus["records"]:
        text = (small_corpus["dir"] / rec.report_path).read_text()
        vec, _ = extract_from_text(text, lex)
        pred.append(set(vec.concept_ids(lex)))
        entry = small_corpus["truth"][rec.case_id]
        truth.append({c.id for c, v in zip(lex.concepts, entry["concept_values"]) if v})
    prf = concept_set_prf(pred, truth)
    assert prf.f1 == 1.0 and prf.precision == 1.0 and prf.recall == 1.0


def test_positive_templates_mention_exactly_their_concept(lex):
    """Each template sentence extracts its own concept and nothing else."""
    for cid, templates in POSITIVE_TEMPLATES.items():
        for sentence in templates:
            vec, spans = extract_from_text(f"FINDINGS: {sentence}", lex)
            assert set(vec.concept_ids(lex)) == {cid}, (cid, sentence)
            assert all(not s.negated for s in spans), (cid, sentence)


def test_filler_sentences_mention_nothing(lex):
    for sentence in FILLER_SENTENCES:
        vec, _ = extract_from_text(f"FINDINGS: {sentence}", lex)
        assert set(vec.concept_ids(lex)) == set(), sentence


def test_decoy_templates_always_negate(lex):
    for concept in lex.concepts:
        if concept.id == "unremarkable":
            continue
        phrase = decoy_phrase(lex, concept.id)
        for template in DECOY_TEMPLATES:
            sentence = template.format(phrase=phrase)
            vec, spans = extract_from_text(f"IMPRESSION: {sentence}", lex)
            assert set(vec.concept_ids(lex)) == set(), (concept.id, sentence)
            assert any(s.negated and s.concept_id == concept.id for s in spans), (
                concept.id,
                sentence,
            )


def test_bbox_contrast_margin(small_corpus, lex):
    """Every rendered finding beats its local background by the margin."""
    margin = 4
    for rec in small_corpus["records"]:
        if not rec.bboxes:
            continue
        tensor = preprocess_image(small_corpus["dir"] / rec.image_path, target_size=64)
        px = tensor.pixels.astype(np.float64)
        for b in rec.bboxes:
            inside = px[b.y0 : b.y1, b.x0 : b.x1].mean()
            ring = np.zeros_like(px, dtype=bool)
            ring[
                max(0, b.y0 - margin) : min(64, b.y1 + margin),
                max(0, b.x0 - margin) : min(64, b.x1 + margin),
            ] = True
            ring[b.y0 : b.y1, b.x0 : b.x1] = False
            assert abs(inside - px[ring].mean()) >= CONTRAST_MARGIN, (rec.case_id, b)


def test_bboxes_inside_image(small_corpus):
    size = small_corpus["spec"].image_size
    for rec in small_corpus["records"]:
        for b in rec.bboxes:
            assert 0 <= b.x0 < b.x1 <= size
            assert 0 <= b.y0 < b.y1 <= size


def test_concept_set_determines_label(small_corpus, lex):
    """Injectivity: one concept set never appears under two labels."""
    seen: dict[tuple, str] = {}
    for rec in small_corpus["records"]:
        entry = small_corpus["truth"][rec.case_id]
        key = tuple(entry["concept_values"])
        assert entry["label"] == rec.label
        if key in seen:
            assert seen[key] == rec.label
        seen[key] = rec.label
        concept_ids = [c.id for c, v in zip(lex.concepts, key) if v]
        assert label_for_concepts(concept_ids, lex) == rec.label


def test_label_mix_respected(tmp_path, lex):
    spec = SynthSpec(
        n_cases=300,
        image_size=64,
        label_mix={"Healthy": 0.5, "Cardiomegaly": 0.5},
        seed=2,
    )
    manifest = generate_corpus(spec, tmp_path, lex)
    labels = {r.label for r in load_manifest(manifest)}
    assert labels == {"Healthy", "Cardiomegaly"}
