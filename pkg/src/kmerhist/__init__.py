"""Streaming k-mer abundance-histogram sketch and histogram model estimators."""

from .errors import (
    CapacityError,
    ChecksumError,
    ConfigurationError,
    EstimationError,
    FitError,
    KmerHistError,
    MergeError,
    ModelInconsistencyError,
    ParseError,
    SketchFormatError,
    TruncationError,
    UnsupportedMultiplicityError,
    VersionMismatchError,
)
from .histogram import AbundanceHistogram
from .sketch import (
    V_MAX,
    AbundanceSketch,
    LevelAddress,
    SketchParams,
    estimate_f0,
    estimate_fi,
    estimate_histogram,
    locate,
    merge,
    merge_all,
    new_sketch,
    update,
)

__version__ = "0.1.0"
