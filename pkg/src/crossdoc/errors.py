"""Exception types shared across the workbench."""


class CrossdocError(Exception):
    """Base class for all workbench errors."""


class SpanError(CrossdocError):
    """Invalid character range (start >= end, out of bounds, zero length)."""


class CrossDocumentError(CrossdocError):
    """Pairing violated the cross-document constraint."""


class FormatError(CrossdocError):
    """A file did not conform to its schema."""


class ConflictError(CrossdocError):
    """Two inputs disagree (duplicate ids with different content, contradictory scores)."""


class InsufficientMetadataError(CrossdocError):
    """Neither DOI nor author/date metadata available for matching."""


class EmptySpanError(CrossdocError):
    """A mention covers no tokens in the embedding table."""


class DegenerateVectorError(CrossdocError):
    """Zero vector or dimension mismatch in a similarity computation."""


class StaleClaimError(CrossdocError):
    """Submission without a live claim (or past an eligibility limit)."""


class UnknownPairError(CrossdocError):
    """Referenced candidate pair does not exist."""


class DuplicatePairError(CrossdocError):
    """Proposed pair duplicates or overlaps an existing annotated pair."""

    def __init__(self, message: str, existing_key=None):
        super().__init__(message)
        self.existing_key = existing_key


class InsufficientDataError(CrossdocError):
    """Not enough observations to compute the requested statistic."""


class UndefinedScoreError(CrossdocError):
    """The statistic is undefined for this input (degenerate denominator)."""
