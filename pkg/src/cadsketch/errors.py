"""Exception types shared across the toolkit."""


class CadSketchError(Exception):
    """Base class for all toolkit errors."""


class MalformedFile(CadSketchError):
    """Mesh file is syntactically broken (truncated, bad token, bad index).

    Carries a human-readable location: a 1-based line number for text
    formats, a byte offset for binary ones.
    """

    def __init__(self, message, *, line=None, offset=None):
        loc = ""
        if line is not None:
            loc = f" (line {line})"
        elif offset is not None:
            loc = f" (byte offset {offset})"
        super().__init__(f"{message}{loc}")
        self.line = line
        self.offset = offset


class UnsupportedFormat(CadSketchError):
    """File format could not be identified or is not supported."""


class DegenerateMesh(CadSketchError):
    """Mesh has no usable extent (all vertices coincident, no faces)."""


class InvalidParams(CadSketchError):
    """Parameter combination violates an operation's preconditions."""


class DimensionMismatch(CadSketchError):
    """Two images that must share a shape do not."""


class ImageTooSmall(CadSketchError):
    """Image is smaller than the operation's minimum working size."""


class DimensionNotDivisible(CadSketchError):
    """Image dimensions are not a multiple of the HOG cell size."""


class MissingReference(CadSketchError):
    """Corpus comparison found generated sketches without a reference."""

    def __init__(self, missing_ids):
        self.missing_ids = sorted(missing_ids)
        super().__init__(
            "no reference sketch for: " + ", ".join(self.missing_ids)
        )


class MissingViews(CadSketchError):
    """A model in the index build does not have all 20 view images."""


class EmptyIndex(CadSketchError):
    """Query issued against a feature bag with no entries."""


class EmptyCorpus(CadSketchError):
    """Corpus scan found no mesh files."""


class DuplicateModelId(CadSketchError):
    """Two corpus files resolve to the same model identifier."""
