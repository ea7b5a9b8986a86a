"""Expert concept vocabulary: concepts grouped under pathology labels.

The lexicon is configuration, not code. Phrase lists shipped in
``data/default_lexicon.json`` are starter values (display names plus common
synonyms) and are meant to be replaced by an expert's own lists. Concept
order in the file is canonical: it defines the index of each concept in
every downstream concept vector.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import LexiconError, UnknownConceptError


@dataclass(frozen=True)
class ConceptDef:
    """One clinical concept with its trigger phrases."""

    id: str
    display_name: str
    label_group: str
    phrases: tuple[str, ...]


@dataclass(frozen=True)
class Violation:
    """A lexicon rule violation; ``severity`` is 'error' or 'warning'."""

    rule: str
    concept_id: str
    message: str
    severity: str = "error"


class ConceptLexicon:
    """Immutable, order-preserving concept vocabulary.

    Safe to share across threads after construction. ``lexicon_id`` is a
    content hash, so two lexicons with identical content are interchangeable.
    """

    def __init__(self, concepts: tuple[ConceptDef, ...], labels: tuple[str, ...]):
        self.concepts = tuple(concepts)
        self.labels = tuple(labels)
        self._index = {c.id: i for i, c in enumerate(self.concepts)}
        self.lexicon_id = hashlib.sha256(
            json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        ).hexdigest()[:16]

    def __len__(self) -> int:
        return len(self.concepts)

    def __eq__(self, other) -> bool:
        return isinstance(other, ConceptLexicon) and self.lexicon_id == other.lexicon_id

    def __hash__(self) -> int:
        return hash(self.lexicon_id)

    @property
    def concept_ids(self) -> list[str]:
        return [c.id for c in self.concepts]

    def index_of(self, concept_id: str) -> int:
        try:
            return self._index[concept_id]
        except KeyError:
            raise UnknownConceptError(f"unknown concept id: {concept_id!r}") from None

    def concept(self, concept_id: str) -> ConceptDef:
        return self.concepts[self.index_of(concept_id)]

    def concepts_for_label(self, label: str) -> list[ConceptDef]:
        return [c for c in self.concepts if c.label_group == label]

    def label_index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LexiconError(f"unknown label: {label!r}") from None

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "concepts": [
                {
                    "id": c.id,
                    "display_name": c.display_name,
                    "label_group": c.label_group,
                    "phrases": list(c.phrases),
                }
                for c in self.concepts
            ],
        }


def lexicon_from_dict(obj: dict) -> ConceptLexicon:
    """Build a lexicon from a parsed JSON document, raising on fatal violations."""
    if not isinstance(obj, dict):
        raise LexiconError("lexicon document must be a JSON object")
    for key in ("labels", "concepts"):
        if key not in obj:
            raise LexiconError(f"lexicon document missing top-level {key!r}")
    labels = obj["labels"]
    if not isinstance(labels, list) or not labels or not all(isinstance(x, str) for x in labels):
        raise LexiconError("'labels' must be a non-empty list of strings")

    concepts: list[ConceptDef] = []
    seen: set[str] = set()
    for entry in obj["concepts"]:
        cid = entry.get("id", "<missing id>")
        for key in ("id", "display_name", "label_group", "phrases"):
            if key not in entry:
                raise LexiconError(f"concept {cid!r}: missing field {key!r}")
        if entry["id"] in seen:
            raise LexiconError(f"concept {entry['id']!r}: duplicate concept id")
        seen.add(entry["id"])
        if entry["label_group"] not in labels:
            raise LexiconError(
                f"concept {entry['id']!r}: unknown label group {entry['label_group']!r}"
            )
        phrases = entry["phrases"]
        if not isinstance(phrases, list) or not phrases:
            raise LexiconError(f"concept {entry['id']!r}: phrase list must be non-empty")
        if len(set(phrases)) != len(phrases):
            raise LexiconError(f"concept {entry['id']!r}: duplicate phrases within concept")
        concepts.append(
            ConceptDef(
                id=entry["id"],
                display_name=entry["display_name"],
                label_group=entry["label_group"],
                phrases=tuple(phrases),
            )
        )
    return ConceptLexicon(tuple(concepts), tuple(labels))


def load_lexicon(path: str | Path) -> ConceptLexicon:
    """Load a lexicon file, preserving file order as the canonical concept order."""
    path = Path(path)
    if not path.exists():
        raise LexiconError(f"lexicon file not found: {path}")
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise LexiconError(f"lexicon file {path} is not valid JSON: {exc}") from exc
    return lexicon_from_dict(obj)


def save_lexicon(lex: ConceptLexicon, path: str | Path) -> None:
    """Write the lexicon in canonical formatting; load(save(x)) round-trips bit-identically."""
    Path(path).write_text(
        json.dumps(lex.to_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )


def default_lexicon() -> ConceptLexicon:
    """The shipped 17-concept, 6-label starter lexicon."""
    data = resources.files("conceptray.data").joinpath("default_lexicon.json").read_text("utf-8")
    return lexicon_from_dict(json.loads(data))


def validate_lexicon(lex: ConceptLexicon) -> list[Violation]:
    """Check lexicon invariants.

    Returns an empty list iff every invariant holds. Cross-concept phrase
    overlap is reported with severity 'warning' (an expert may intentionally
    map one phrase to two concepts); everything else is 'error'.
    """
    violations: list[Violation] = []
    seen_ids: set[str] = set()
    label_set = set(lex.labels)
    phrase_owner: dict[str, str] = {}
    for c in lex.concepts:
        if c.id in seen_ids:
            violations.append(Violation("unique-id", c.id, f"duplicate concept id {c.id!r}"))
        seen_ids.add(c.id)
        if c.label_group not in label_set:
            violations.append(
                Violation("known-label", c.id, f"label group {c.label_group!r} not in labels")
            )
        if not c.phrases:
            violations.append(Violation("non-empty-phrases", c.id, "phrase list is empty"))
        if len(set(c.phrases)) != len(c.phrases):
            violations.append(
                Violation("unique-phrases", c.id, "duplicate phrases within concept")
            )
        for p in c.phrases:
            if p != p.lower():
                violations.append(
                    Violation("lowercase-phrases", c.id, f"phrase {p!r} is not lowercase")
                )
            if p in phrase_owner and phrase_owner[p] != c.id:
                violations.append(
                    Violation(
                        "cross-concept-overlap",
                        c.id,
                        f"phrase {p!r} also appears under concept {phrase_owner[p]!r}",
                        severity="warning",
                    )
                )
            phrase_owner.setdefault(p, c.id)
    return violations
