"""Exception hierarchy shared by every module."""


class KmerHistError(Exception):
    """Base class for all package errors."""


class ConfigurationError(KmerHistError, ValueError):
    """Invalid sketch, genome or read parameters."""


class MergeError(KmerHistError):
    """Sketches with different parameters or seeds cannot be combined."""


class EstimationError(KmerHistError):
    """The sketch cannot produce an estimate (e.g. every level saturated)."""


class UnsupportedMultiplicityError(EstimationError):
    """Requested multiplicity exceeds the counter saturation value."""


class SketchFormatError(KmerHistError):
    """Malformed sketch file."""


class VersionMismatchError(SketchFormatError):
    pass


class TruncationError(SketchFormatError):
    pass


class ChecksumError(SketchFormatError):
    pass


class ParseError(KmerHistError):
    """Malformed FASTA/FASTQ input. ``offset`` is the byte offset of the bad record."""

    def __init__(self, message: str, offset: int | None = None, source: str | None = None):
        self.offset = offset
        self.source = source
        where = []
        if source is not None:
            where.append(str(source))
        if offset is not None:
            where.append(f"byte {offset}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class CapacityError(KmerHistError):
    """Exact counting exceeded its configured memory budget."""


class FitError(KmerHistError):
    """Histogram shape does not allow a model fit."""


class ModelInconsistencyError(FitError):
    pass
