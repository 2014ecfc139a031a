"""Exception taxonomy shared across the pipeline.

Three families map to distinct CLI exit codes: configuration problems,
bad input data, and external-service failures. Everything inherits from
PipelineError so callers can catch pipeline faults without swallowing
programming errors.
"""

from __future__ import annotations


class PipelineError(Exception):
    """Base class for all pipeline faults."""


class ConfigError(PipelineError):
    """Invalid or inconsistent configuration."""


class InputError(PipelineError):
    """Malformed or contract-violating input data.

    Carries an optional line number for line-delimited sources.
    """

    def __init__(self, message: str, *, line_no: int | None = None, path: str | None = None):
        self.line_no = line_no
        self.path = path
        prefix = ""
        if path is not None:
            prefix += f"{path}"
        if line_no is not None:
            prefix += f":{line_no}"
        super().__init__(f"{prefix}: {message}" if prefix else message)


class ServiceError(PipelineError):
    """The annotation service answered with a non-success response."""

    def __init__(self, message: str, *, status: int | None = None, payload_excerpt: str = ""):
        self.status = status
        self.payload_excerpt = payload_excerpt[:200]
        detail = f" (status={status})" if status is not None else ""
        excerpt = f": {self.payload_excerpt}" if self.payload_excerpt else ""
        super().__init__(f"{message}{detail}{excerpt}")


class TransportError(PipelineError):
    """The annotation service could not be reached after all retries."""


class AnnotationMissingError(PipelineError):
    """No topic candidates were produced for a document."""

    def __init__(self, doc_id: str):
        self.doc_id = doc_id
        super().__init__(f"no topic candidates for document {doc_id!r}")


class MissingEmbeddingError(PipelineError):
    """A non-computing embedding store has no vector for a requested text."""

    def __init__(self, key: str):
        self.key = key
        super().__init__(f"no embedding stored for key {key}")


class ProtocolError(PipelineError):
    """Embedding request/response exchange violated the file protocol."""
