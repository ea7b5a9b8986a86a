import json

import pytest

from conceptray.errors import LexiconError, UnknownConceptError
from conceptray.extraction import extract_from_text
from conceptray.lexicon import (
    ConceptDef,
    ConceptLexicon,
    default_lexicon,
    lexicon_from_dict,
    load_lexicon,
    save_lexicon,
    validate_lexicon,
)

EXPECTED_GROUPS = {
    "Healthy": 1,
    "Lung Cancer": 5,
    "Pneumonia": 4,
    "Pleural Effusion": 4,
    "Cardiomegaly": 1,
    "Pneumothorax": 2,
}


def minimal_doc():
    return {
        "labels": ["Healthy", "Lung Cancer", "Pneumonia", "Pleural Effusion",
                   "Cardiomegaly", "Pneumothorax"],
        "concepts": [
            {"id": "mass", "display_name": "Mass", "label_group": "Lung Cancer",
             "phrases": ["mass"]},
        ],
    }


def test_default_lexicon_shape():
    lex = default_lexicon()
    assert len(lex) == 17
    assert len(lex.labels) == 6
    counts = {lab: len(lex.concepts_for_label(lab)) for lab in lex.labels}
    assert counts == EXPECTED_GROUPS
    assert lex.concepts[0].id == "unremarkable"
    assert len(set(lex.concept_ids)) == 17


def test_default_lexicon_validates_clean():
    assert validate_lexicon(default_lexicon()) == []


def test_load_minimal_lexicon(tmp_path):
    path = tmp_path / "lex.json"
    path.write_text(json.dumps(minimal_doc()))
    lex = load_lexicon(path)
    assert len(lex) == 1
    assert lex.concepts[0].id == "mass"


def test_missing_file():
    with pytest.raises(LexiconError, match="not found"):
        load_lexicon("/nonexistent/lex.json")


def test_duplicate_id_names_concept(tmp_path):
    doc = minimal_doc()
    doc["concepts"].append(dict(doc["concepts"][0]))
    path = tmp_path / "lex.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(LexiconError, match="'mass'"):
        load_lexicon(path)


@pytest.mark.parametrize(
    "mutate,message",
    [
        (lambda d: d["concepts"][0].pop("display_name"), "missing field"),
        (lambda d: d["concepts"][0].update(phrases=[]), "non-empty"),
        (lambda d: d["concepts"][0].update(label_group="Zebra"), "unknown label group"),
        (lambda d: d["concepts"][0].update(phrases=["mass", "mass"]), "duplicate phrases"),
    ],
)
def test_schema_violations(tmp_path, mutate, message):
    doc = minimal_doc()
    mutate(doc)
    path = tmp_path / "lex.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(LexiconError, match=message):
        load_lexicon(path)


def test_save_load_round_trip_bit_identical(tmp_path):
    lex = default_lexicon()
    p1 = tmp_path / "a.json"
    p2 = tmp_path / "b.json"
    save_lexicon(lex, p1)
    reloaded = load_lexicon(p1)
    assert reloaded == lex
    save_lexicon(reloaded, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_vector_index_follows_file_order(tmp_path):
    """Permuting the concept order permutes extraction vectors identically."""
    lex = default_lexicon()
    doc = lex.to_dict()
    doc["concepts"] = list(reversed(doc["concepts"]))
    permuted = lexicon_from_dict(doc)
    report = (
        "FINDINGS: There is a large mass in the right upper lobe. "
        "A moderate pleural effusion is present. IMPRESSION: No consolidation."
    )
    vec, _ = extract_from_text(report, lex)
    vec_p, _ = extract_from_text(report, permuted)
    assert vec.values == tuple(reversed(vec_p.values))
    assert vec.values[lex.index_of("mass")] == 1
    assert vec_p.values[permuted.index_of("mass")] == 1


def test_cross_concept_overlap_is_warning():
    labels = ("Healthy", "Lung Cancer")
    lex = ConceptLexicon(
        (
            ConceptDef("a", "A", "Healthy", ("shared phrase",)),
            ConceptDef("b", "B", "Lung Cancer", ("shared phrase", "other")),
        ),
        labels,
    )
    violations = validate_lexicon(lex)
    assert len(violations) == 1
    assert violations[0].rule == "cross-concept-overlap"
    assert violations[0].severity == "warning"


def test_validate_flags_empty_phrases():
    lex = ConceptLexicon(
        (ConceptDef("a", "A", "Healthy", ()),), ("Healthy",)
    )
    violations = validate_lexicon(lex)
    assert any(v.rule == "non-empty-phrases" and v.concept_id == "a" for v in violations)


def test_unknown_concept_lookup():
    with pytest.raises(UnknownConceptError, match="zebra"):
        default_lexicon().index_of("zebra")
