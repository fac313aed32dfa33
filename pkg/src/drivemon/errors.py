"""Exception hierarchy shared across the pipeline.

The CLI maps these onto exit codes: data-shaped failures (schema, values,
ordering, training blow-ups) exit 3, artifact mismatches exit 4.
"""


class PipelineError(Exception):
    """Base class for all drivemon errors."""


class SchemaError(PipelineError):
    """CSV header or file-schema violation; message names the column."""


class DataError(PipelineError):
    """Bad values, empty inputs, or size guards; message cites the row where known."""


class OrderingError(DataError):
    """Timestamps out of order or off the uniform sample grid."""


class ArtifactError(PipelineError):
    """Persisted model/scaler/threshold artifacts are corrupt or mutually inconsistent."""


class TrainingError(PipelineError):
    """Training aborted (non-finite loss); message cites epoch and batch."""
