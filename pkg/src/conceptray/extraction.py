"""Free-text radiology report -> binary concept vector, excluding negated mentions.

Pipeline: segment the report into FINDINGS/IMPRESSION, normalize each
sentence (lowercase, strip punctuation except intra-word hyphens and
intra-number dots, drop stop tokens), match lexicon phrases whole-token and
contiguously, and suppress mentions that sit inside a forward negation
scope. Matching is whole-token so "massive" never matches "mass".

All functions here are pure and deterministic: identical (report, lexicon)
input yields identical output across runs and platforms.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import ManifestError
from .lexicon import ConceptLexicon

# Forward negation scope: a trigger negates a phrase at most this many tokens
# after the trigger's last token, unless a scope breaker intervenes.
SCOPE_WINDOW = 6
SCOPE_BREAKERS = frozenset({"but", "however", "although", "though", "except", "yet"})

SECTION_NAMES = ("FINDINGS", "IMPRESSION")


@dataclass(frozen=True)
class ReportDocument:
    """A report split into its relevant sections.

    ``headerless`` is set when no section header was found and the whole
    text was treated as FINDINGS.
    """

    raw_text: str
    sections: dict[str, str]
    headerless: bool = False


@dataclass(frozen=True)
class ConceptVector:
    """Binary presence indicator per concept, in canonical lexicon order."""

    values: tuple[int, ...]
    lexicon_id: str

    def concept_ids(self, lex: ConceptLexicon) -> list[str]:
        """Ids of the concepts marked present."""
        return [c.id for c, v in zip(lex.concepts, self.values) if v]


@dataclass(frozen=True)
class MentionSpan:
    """One phrase occurrence inside a normalized sentence.

    ``char_range`` indexes the normalized sentence text (half-open);
    ``matched_text`` is the exact slice at that range.
    """

    concept_id: str
    phrase: str
    section: str
    sentence_index: int
    char_range: tuple[int, int]
    negated: bool
    matched_text: str


_HEADER_RE = re.compile(
    r"(?im)^[ \t]*(?P<bare>FINDINGS|IMPRESSION)[ \t]*:?[ \t]*$"
    r"|\b(?P<colon>FINDINGS|IMPRESSION)\b[ \t]*:",
)

_SENTENCE_SPLIT_RE = re.compile(r"(?<=[.!?])\s+")

# Protect intra-word hyphens and intra-number dots before stripping punctuation.
_HYPHEN_RE = re.compile(r"(?<=[a-z0-9])-(?=[a-z0-9])")
_NUMDOT_RE = re.compile(r"(?<=[0-9])\.(?=[0-9])")
_PUNCT_RE = re.compile(r"[^a-z0-9\s\x00\x01]")


def _load_word_list(name: str) -> tuple[str, ...]:
    data = resources.files("conceptray.data").joinpath(name).read_text("utf-8")
    return tuple(json.loads(data))


def default_stop_tokens() -> tuple[str, ...]:
    """Shipped 'extraneous word' list; configurable per call site."""
    return _load_word_list("stop_tokens.json")


def default_negation_triggers() -> tuple[str, ...]:
    """Shipped NegEx-style trigger list; configurable per call site."""
    return _load_word_list("negation_triggers.json")


def load_negation_triggers(path: str | Path) -> tuple[str, ...]:
    """Load an override trigger table (UTF-8 JSON list of strings)."""
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(obj, list) or not all(isinstance(x, str) for x in obj):
        raise ValueError(f"negation trigger table {path} must be a JSON list of strings")
    return tuple(obj)


def segment_report(raw_text: str) -> ReportDocument:
    """Split a report into FINDINGS and IMPRESSION sections.

    Headers match case-insensitively, with or without a trailing colon.
    When the same header appears more than once its chunks are joined in
    order. Without any recognized header the whole text becomes FINDINGS
    and the document is flagged ``headerless``.
    """
    if not raw_text:
        raise ValueError("raw_text must be non-empty")

    matches = list(_HEADER_RE.finditer(raw_text))
    if not matches:
        return ReportDocument(
            raw_text=raw_text,
            sections={"FINDINGS": raw_text.strip(), "IMPRESSION": ""},
            headerless=True,
        )

    chunks: dict[str, list[str]] = {name: [] for name in SECTION_NAMES}
    for i, m in enumerate(matches):
        name = (m.group("bare") or m.group("colon")).upper()
        start = m.end()
        end = matches[i + 1].start() if i + 1 < len(matches) else len(raw_text)
        text = raw_text[start:end].strip()
        if text:
            chunks[name].append(text)
    sections = {name: "\n".join(parts) for name, parts in chunks.items()}
    return ReportDocument(raw_text=raw_text, sections=sections, headerless=False)


def _normalize_one(sentence: str, stop_tokens: frozenset[str]) -> str:
    s = sentence.lower()
    s = _HYPHEN_RE.sub("\x00", s)
    s = _NUMDOT_RE.sub("\x01", s)
    s = _PUNCT_RE.sub(" ", s)
    s = s.replace("\x00", "-").replace("\x01", ".")
    tokens = [t for t in s.split() if t not in stop_tokens]
    return " ".join(tokens)


def normalize_sentences(
    section_text: str, stop_tokens: tuple[str, ...] | None = None
) -> list[str]:
    """Split on sentence terminators and normalize each sentence.

    One output entry per source sentence (count preserved); a sentence that
    normalizes to nothing stays as an empty string. The list index is the
    sentence index recorded in mention spans.
    """
    if not section_text or not section_text.strip():
        return []
    stops = frozenset(stop_tokens if stop_tokens is not None else default_stop_tokens())
    pieces = _SENTENCE_SPLIT_RE.split(section_text.strip())
    return [_normalize_one(p, stops) for p in pieces]


def _token_spans(sentence: str) -> list[tuple[str, int, int]]:
    """Tokens of a normalized sentence with their (start, end) char offsets."""
    spans = []
    pos = 0
    for tok in sentence.split(" "):
        if tok:
            spans.append((tok, pos, pos + len(tok)))
        pos += len(tok) + 1
    return spans


def _normalize_phrase(phrase: str, stop_tokens: frozenset[str]) -> tuple[str, ...]:
    return tuple(_normalize_one(phrase, stop_tokens).split())


class _Matcher:
    """Compiled phrase/trigger tables for one (lexicon, stops, triggers) combo."""

    def __init__(
        self,
        lex: ConceptLexicon,
        stop_tokens: tuple[str, ...],
        triggers: tuple[str, ...],
    ):
        self.lex = lex
        self.stops = frozenset(stop_tokens)
        # (concept_index, original_phrase, normalized token tuple)
        self.phrases: list[tuple[int, str, tuple[str, ...]]] = []
        for ci, concept in enumerate(lex.concepts):
            for phrase in concept.phrases:
                toks = _normalize_phrase(phrase, self.stops)
                if toks:
                    self.phrases.append((ci, phrase, toks))
        self.trigger_seqs = tuple(
            seq for seq in (_normalize_phrase(t, self.stops) for t in triggers) if seq
        )


_MATCHER_CACHE: dict[tuple, _Matcher] = {}


def _get_matcher(
    lex: ConceptLexicon,
    stop_tokens: tuple[str, ...] | None,
    triggers: tuple[str, ...] | None,
) -> _Matcher:
    stops = tuple(stop_tokens if stop_tokens is not None else default_stop_tokens())
    trigs = tuple(triggers if triggers is not None else default_negation_triggers())
    key = (lex.lexicon_id, stops, trigs)
    if key not in _MATCHER_CACHE:
        _MATCHER_CACHE[key] = _Matcher(lex, stops, trigs)
    return _MATCHER_CACHE[key]


def _find_trigger_ends(tokens: list[str], trigger_seqs) -> list[int]:
    """Exclusive token indices where any trigger occurrence ends."""
    ends = []
    for seq in trigger_seqs:
        n = len(seq)
        for i in range(len(tokens) - n + 1):
            if tuple(tokens[i : i + n]) == seq:
                ends.append(i + n)
    return ends


def _negated_at(tokens: list[str], phrase_start: int, trigger_ends: list[int]) -> bool:
    for e in trigger_ends:
        if e <= phrase_start and phrase_start - e <= SCOPE_WINDOW:
            if not any(t in SCOPE_BREAKERS for t in tokens[e:phrase_start]):
                return True
    return False


def detect_negation(
    sentence: str,
    phrase_range: tuple[int, int],
    triggers: tuple[str, ...] | None = None,
    stop_tokens: tuple[str, ...] | None = None,
) -> bool:
    """True iff the phrase at ``phrase_range`` of a normalized sentence is negated.

    A phrase is negated when a trigger's last token ends at most
    ``SCOPE_WINDOW`` tokens before the phrase start within the same
    sentence, with no scope breaker between them. Triggers after or inside
    the phrase never negate it (forward scope only).
    """
    start, end = phrase_range
    if not (0 <= start < end <= len(sentence)):
        raise ValueError(f"phrase_range {phrase_range} outside sentence of length {len(sentence)}")
    stops = frozenset(stop_tokens if stop_tokens is not None else default_stop_tokens())
    trigs = tuple(triggers if triggers is not None else default_negation_triggers())
    trigger_seqs = tuple(seq for seq in (_normalize_phrase(t, stops) for t in trigs) if seq)

    spans = _token_spans(sentence)
    tokens = [t for t, _, _ in spans]
    phrase_tok = next((i for i, (_, s, _) in enumerate(spans) if s == start), None)
    if phrase_tok is None:
        # Range does not begin on a token boundary; fall back to the token containing it.
        phrase_tok = max(
            (i for i, (_, s, _) in enumerate(spans) if s <= start), default=0
        )
    return _negated_at(tokens, phrase_tok, _find_trigger_ends(tokens, trigger_seqs))


def extract_concepts(
    report: ReportDocument,
    lex: ConceptLexicon,
    triggers: tuple[str, ...] | None = None,
    stop_tokens: tuple[str, ...] | None = None,
) -> tuple[ConceptVector, list[MentionSpan]]:
    """Extract the binary concept vector and all mention spans from a report.

    A concept is present iff at least one non-negated mention of any of its
    phrases occurs in FINDINGS or IMPRESSION. Negated mentions are still
    returned as spans (with ``negated=True``) for audit.
    """
    matcher = _get_matcher(lex, stop_tokens, triggers)
    values = [0] * len(lex)
    spans: list[MentionSpan] = []

    for section in SECTION_NAMES:
        sentences = normalize_sentences(
            report.sections.get(section, ""), tuple(sorted(matcher.stops))
        )
        for si, sentence in enumerate(sentences):
            if not sentence:
                continue
            tok_spans = _token_spans(sentence)
            tokens = [t for t, _, _ in tok_spans]
            trigger_ends = _find_trigger_ends(tokens, matcher.trigger_seqs)
            for ci, phrase, ptoks in matcher.phrases:
                n = len(ptoks)
                for i in range(len(tokens) - n + 1):
                    if tuple(tokens[i : i + n]) != ptoks:
                        continue
                    start = tok_spans[i][1]
                    end = tok_spans[i + n - 1][2]
                    negated = _negated_at(tokens, i, trigger_ends)
                    spans.append(
                        MentionSpan(
                            concept_id=lex.concepts[ci].id,
                            phrase=phrase,
                            section=section,
                            sentence_index=si,
                            char_range=(start, end),
                            negated=negated,
                            matched_text=sentence[start:end],
                        )
                    )
                    if not negated:
                        values[ci] = 1

    return ConceptVector(tuple(values), lex.lexicon_id), spans


def extract_from_text(
    raw_text: str,
    lex: ConceptLexicon,
    triggers: tuple[str, ...] | None = None,
    stop_tokens: tuple[str, ...] | None = None,
) -> tuple[ConceptVector, list[MentionSpan]]:
    """Convenience: segment then extract."""
    return extract_concepts(segment_report(raw_text), lex, triggers, stop_tokens)


def annotate_corpus(
    records,
    lex: ConceptLexicon,
    base_dir: str | Path | None = None,
    triggers: tuple[str, ...] | None = None,
    max_skip_fraction: float = 0.10,
):
    """Attach a ConceptVector to every record whose report file is readable.

    Returns ``(annotated_records, summary)`` where summary carries
    per-concept positive counts and the skipped case ids. Unreadable
    reports are flagged and skipped; more than ``max_skip_fraction`` skipped
    fails the run.
    """
    from .corpus import CaseRecord  # deferred: corpus imports ConceptVector from here

    base = Path(base_dir) if base_dir is not None else None
    annotated: list[CaseRecord] = []
    skipped: list[str] = []
    counts = {c.id: 0 for c in lex.concepts}

    for rec in records:
        path = Path(rec.report_path)
        if base is not None and not path.is_absolute():
            path = base / path
        try:
            text = path.read_text(encoding="utf-8")
            vector, _ = extract_from_text(text, lex, triggers)
        except (OSError, ValueError):
            skipped.append(rec.case_id)
            continue
        for c, v in zip(lex.concepts, vector.values):
            counts[c.id] += v
        annotated.append(rec.with_concept_vector(vector))

    total = len(annotated) + len(skipped)
    if total and len(skipped) / total > max_skip_fraction:
        raise ManifestError(
            f"{len(skipped)}/{total} reports unreadable (> {max_skip_fraction:.0%}): "
            f"first failures {skipped[:5]}"
        )
    summary = {
        "n_records": total,
        "n_annotated": len(annotated),
        "n_skipped": len(skipped),
        "skipped_case_ids": skipped,
        "positive_counts": counts,
    }
    return annotated, summary
