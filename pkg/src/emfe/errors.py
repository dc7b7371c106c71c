"""Exception types raised across the pipeline.

Plain OSError (FileNotFoundError etc.) is used for filesystem failures;
everything below signals a data or protocol problem.
"""


class PipelineError(Exception):
    """Base class for all pipeline-specific errors."""


class DecodeError(PipelineError):
    """File is not a decodable PNG image."""


class DegenerateImageError(PipelineError):
    """Image has a single intensity value; no threshold separates two classes."""


class EmptyInputError(PipelineError):
    """An operation that needs at least one element received none."""


class MissingClassDirError(PipelineError):
    """Dataset root lacks a required class subdirectory."""


class AllFilesFailedError(PipelineError):
    """No image in the dataset tree could be processed."""


class SingleClassTableError(PipelineError):
    """Both classes are required but only one is present."""


class TooFewSamplesError(PipelineError):
    """Not enough samples for the requested fold count."""


class ConstantColumnError(PipelineError):
    """A feature column is constant; correlation/standardization undefined."""


class NonBinaryLabelsError(PipelineError):
    """Labels must be exactly {0, 1}."""


class DivergedError(PipelineError):
    """Optimizer produced non-finite loss or ran out of passes while still moving."""


class KTooLargeError(PipelineError):
    """n_neighbors exceeds the training set size."""


class LengthMismatchError(PipelineError):
    """Paired arrays have different lengths."""


class EmptySearchSpaceError(PipelineError):
    """Hyperparameter search space contains no configurations."""


class SchemaError(PipelineError):
    """Feature CSV is malformed or violates the fixed schema."""


class VersionMismatchError(PipelineError):
    """Model file was written by an incompatible format version."""


class CorruptModelError(PipelineError):
    """Model file is truncated or fails its checksum."""
