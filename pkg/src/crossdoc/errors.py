"""Exception taxonomy shared across the toolchain.

Every error raised by the public API derives from CrossdocError so callers
can catch one base. Subclasses are grouped by the subsystem that raises
them; a few carry structured context (attempt counts, diffs, JSON paths)
because the message alone is not enough to act on.
"""

from __future__ import annotations


class CrossdocError(Exception):
    """Base class for all toolchain errors."""


# --- ingest ---------------------------------------------------------------

class MalformedInput(CrossdocError):
    """Input bytes could not be decoded or hold no parseable body."""


class NoContent(CrossdocError):
    """Parsed document contains zero passages and zero figures."""


class EmptyCaption(CrossdocError):
    """Caption splitting was asked to split an empty string."""


class UnknownFigure(CrossdocError):
    """Figure number does not exist in the document."""


class UnknownPassage(CrossdocError):
    """Passage index does not exist in the document."""


# --- providers ------------------------------------------------------------

class ProviderUnavailable(CrossdocError):
    """Provider failed after the configured number of attempts.

    ``attempts`` records how many calls were actually made.
    """

    def __init__(self, message: str, attempts: int = 0):
        super().__init__(message)
        self.attempts = attempts


class RateLimited(CrossdocError):
    """Provider asked us to back off; retried by the transport loop."""


class CapabilityMismatch(CrossdocError):
    """Request carries attachments the provider cannot accept."""


class UnparsablePointResponse(CrossdocError):
    """Pointing response could not be converted to coordinates.

    ``raw`` keeps the unparsed text for diagnostics.
    """

    def __init__(self, message: str, raw: str = ""):
        super().__init__(message)
        self.raw = raw


# --- pipeline -------------------------------------------------------------

class UnparsableResponse(CrossdocError):
    """Model response was not valid JSON of the expected shape."""

    def __init__(self, message: str, raw: str = ""):
        super().__init__(message)
        self.raw = raw


class MissingFigureKey(CrossdocError):
    """Identification response omitted the key for the queried figure."""


class ReconstructionMismatch(CrossdocError):
    """Concatenated response keys do not reproduce the unit text.

    ``diff`` carries an aligned diff between expected and received text.
    """

    def __init__(self, message: str, diff: str = ""):
        super().__init__(message)
        self.diff = diff


class PhraseNotFound(CrossdocError):
    """A linked phrase is absent from its host sentence."""


class PipelineError(CrossdocError):
    """Annotation failed for every figure; report attached."""

    def __init__(self, message: str, report: object = None):
        super().__init__(message)
        self.report = report


# --- linkgraph / bundle ---------------------------------------------------

class UnknownEntity(CrossdocError):
    """Entity id is not present in the bundle."""


class UnknownLocation(CrossdocError):
    """Reverse lookup target (mention id or point) is not in the bundle."""


class NoEntities(CrossdocError):
    """Figure has no entities, so no scan sequence exists."""


class VersionUnsupported(CrossdocError):
    """Bundle format_version is newer than this reader supports."""


class SchemaViolation(CrossdocError):
    """Bundle bytes violate the schema; ``path`` points at the offender."""

    def __init__(self, message: str, path: str = "/"):
        super().__init__(f"{path}: {message}")
        self.path = path


class SpanCollision(CrossdocError):
    """Two injected anchors overlap; impossible for a validated bundle."""


# --- server ---------------------------------------------------------------

class PortInUse(CrossdocError):
    """Requested port is already bound."""


class MissingArtifacts(CrossdocError):
    """Serving root lacks required files; ``missing`` lists them."""

    def __init__(self, message: str, missing: list[str] | None = None):
        super().__init__(message)
        self.missing = missing or []


# --- analysis -------------------------------------------------------------

class InsufficientData(CrossdocError):
    """Not enough raters/units/values to run the procedure."""


class EmptySample(CrossdocError):
    """A rank test received an empty sample."""


class DegenerateTable(CrossdocError):
    """A contingency table has an expected cell count of zero."""
