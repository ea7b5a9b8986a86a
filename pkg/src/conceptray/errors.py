"""Exception types shared across the package."""


class ConceptrayError(Exception):
    """Base class for all package errors."""


class LexiconError(ConceptrayError):
    """Lexicon file missing, malformed, or violating a fatal invariant."""


class UnknownConceptError(ConceptrayError):
    """A concept id was referenced that does not exist in the lexicon."""


class ManifestError(ConceptrayError):
    """Dataset manifest missing, malformed, or inconsistent."""


class ImageError(ConceptrayError):
    """Image cannot be decoded or is unusable after preprocessing."""


class ModelError(ConceptrayError):
    """Model artifact mismatch (input size, lexicon) or invalid usage."""


class TrainingDivergedError(ModelError):
    """Training loss became non-finite; carries diagnostics in the message."""


class SaliencyError(ConceptrayError):
    """Saliency map parsing or dimension mismatch."""


class MetricError(ConceptrayError):
    """Metric inputs are inconsistent (length or dimension mismatch)."""


class SynthgenError(ConceptrayError):
    """Synthetic corpus generation cannot proceed (bad spec, unwritable output)."""
