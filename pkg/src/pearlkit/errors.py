"""Exception hierarchy shared across the toolkit.

Every error raised on a documented failure path derives from
:class:`PearlkitError` so callers can catch the whole family at once.
"""


class PearlkitError(Exception):
    """Base class for all pearlkit errors."""


# --- dataset loading ---------------------------------------------------------

class MissingFileError(PearlkitError):
    """A file referenced by the dataset layout does not exist."""


class DimensionMismatchError(PearlkitError):
    """Two grids that must share dimensions do not."""


class UnknownLabelIdError(PearlkitError):
    """A mask pixel carries a label id absent from the label map."""


class MalformedAnnotationError(PearlkitError):
    """The annotation document violates its schema or invariants."""


class MissingAnnotationPointError(PearlkitError):
    """A natural/unnatural baseline needs an annotated point that is absent."""


# --- mask geometry -----------------------------------------------------------

class UniformMaskError(PearlkitError):
    """All pixels belong to one class; no opposite-class pixel exists."""


class EmptyMaskError(PearlkitError):
    """The mask has no set pixel."""


class EmptyMaskListError(PearlkitError):
    """A mask union was requested over an empty list."""


class OutOfBoundsError(PearlkitError):
    """A point lies outside the grid it is bound to."""


# --- metrics -----------------------------------------------------------------

class ZeroNormError(PearlkitError):
    """Cosine similarity is undefined for a zero-norm vector."""


class LengthMismatchError(PearlkitError):
    """Embedding vectors of different lengths cannot be compared."""


class MissingTagsError(PearlkitError):
    """An annotated image has no tag list."""


class MissingSelectionError(PearlkitError):
    """An evaluable pair has no stage-2 selection."""


class MissingInputsError(PearlkitError):
    """Evaluation inputs do not cover every required pair."""


# --- backends and pipeline ---------------------------------------------------

class BackendUnavailableError(PearlkitError):
    """A backend endpoint could not be reached or refused the call."""


class FixtureLookupError(BackendUnavailableError):
    """No recorded response matches the request hash."""

    def __init__(self, endpoint: str, request_hash: str):
        super().__init__(
            f"no fixture response for endpoint {endpoint!r} "
            f"with request hash {request_hash}"
        )
        self.endpoint = endpoint
        self.request_hash = request_hash


class EmptyTagListError(PearlkitError):
    """Tagging or filtering left no candidate tags."""


class EmptyAfterParseError(PearlkitError):
    """A tag-list response parsed to nothing."""


class TemplateMissingPlaceholderError(PearlkitError):
    """A prompt template lacks a required placeholder."""


class SelectionNotInTagsError(PearlkitError):
    """The selector answer is not one of the offered tags, even after retry."""


class NoBoxFoundError(PearlkitError):
    """The detector returned no usable bounding box."""


class EditorDimensionChangeError(PearlkitError):
    """The image editor changed the image dimensions."""


class NoCoordinateInResponseError(PearlkitError):
    """No (x, y) coordinate pair could be parsed from the response."""


class NonPositiveDepthError(PearlkitError):
    """Back-projection requires a strictly positive depth."""


class PipelineStageError(PearlkitError):
    """Wraps a stage failure with the name of the failing stage."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause
