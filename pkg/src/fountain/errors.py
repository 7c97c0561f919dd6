"""Exception hierarchy for the fountain package.

Every error carries a stable ``code`` string so the HTTP layer can map it
into the ``{"error": {"code": ..., "message": ..., "details": ...}}``
envelope without string matching.
"""

from __future__ import annotations

from typing import Any


class FountainError(Exception):
    code = "internal_error"

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details


# --- graph store ---------------------------------------------------------

class EmptyLabels(FountainError):
    code = "empty_labels"


class UpsertConflict(FountainError):
    code = "upsert_conflict"


class DanglingEndpoint(FountainError):
    code = "dangling_endpoint"


class UnknownNode(FountainError):
    code = "unknown_node"


class SnapshotIoError(FountainError):
    code = "io_error"


class FormatVersionMismatch(FountainError):
    code = "format_version_mismatch"


class CorruptRecord(FountainError):
    code = "corrupt_record"

    def __init__(self, message: str, line: int, **details: Any):
        super().__init__(message, line=line, **details)
        self.line = line


# --- query language ------------------------------------------------------

class QuerySyntaxError(FountainError):
    """Raised on unparseable query text; ``position`` is a byte offset."""

    code = "syntax_error"

    def __init__(self, message: str, position: int, expected: str, **details: Any):
        super().__init__(message, position=position, expected=expected, **details)
        self.position = position
        self.expected = expected


class UnboundVariable(FountainError):
    code = "unbound_variable"

    def __init__(self, name: str):
        super().__init__(f"variable '{name}' is not bound in the MATCH pattern", name=name)
        self.name = name


class TooManyHops(FountainError):
    code = "too_many_hops"


class MissingParam(FountainError):
    code = "missing_param"

    def __init__(self, name: str):
        super().__init__(f"no binding for query parameter ${name}", name=name)
        self.name = name


# --- ingestion -----------------------------------------------------------

class MalformedRow(FountainError):
    code = "malformed_row"

    def __init__(self, message: str, line: int, **details: Any):
        super().__init__(message, line=line, **details)
        self.line = line


class MissingParent(FountainError):
    code = "missing_parent"


class CycleDetected(FountainError):
    code = "cycle_detected"

    def __init__(self, path: list[str]):
        super().__init__("cycle in parent chain: " + " -> ".join(path), path=path)
        self.path = path


class DuplicatePartId(FountainError):
    code = "duplicate_part_id"


class UnknownPart(FountainError):
    code = "unknown_part"


class DuplicateClaimId(FountainError):
    code = "duplicate_claim_id"


class SynonymMapError(FountainError):
    code = "synonym_map_error"


# --- embedding -----------------------------------------------------------

class ProviderUnavailable(FountainError):
    code = "provider_unavailable"


class DimensionMismatch(FountainError):
    code = "dimension_mismatch"


# --- linker --------------------------------------------------------------

class PartNotFound(FountainError):
    code = "part_not_found"

    def __init__(self, ref: str, suggestions: list[str]):
        super().__init__(f"no part matches '{ref}'", ref=ref, suggestions=suggestions)
        self.ref = ref
        self.suggestions = suggestions


class AmbiguousPart(FountainError):
    code = "ambiguous_part"

    def __init__(self, ref: str, candidates: list[str]):
        super().__init__(f"'{ref}' matches more than one part", ref=ref, candidates=candidates)
        self.ref = ref
        self.candidates = candidates


# --- explain -------------------------------------------------------------

class NotAFailureMode(FountainError):
    code = "not_a_failure_mode"


# --- evalsuite -----------------------------------------------------------

class UnknownPairId(FountainError):
    code = "unknown_pair_id"


class UnknownDeviation(FountainError):
    code = "unknown_deviation"


# --- service -------------------------------------------------------------

class IngestInProgress(FountainError):
    code = "ingest_in_progress"
