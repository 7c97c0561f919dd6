"""CSV ingestion: BOM hierarchy, FMEA chains, warranty claims, synonyms.

All loaders validate the whole file before touching the graph, so a failed
load leaves the graph unchanged. Re-loading the same file is idempotent
(node and edge counts stay put).

File formats (UTF-8, header row required, RFC-4180 quoting):
    BOM      part_id,parent_id,part_name,level,quantity
    FMEA     fmea_id,fmea_type,part_id,failure_mode,cause,effect,detection,prevention
    Claims   claim_id,part_id,claim_text,date
    Synonyms term,canonical
"""

from __future__ import annotations

import csv
import datetime
import io
import re
from dataclasses import dataclass, field
from typing import IO, Optional, Union

from .errors import (
    CycleDetected,
    DuplicateClaimId,
    DuplicatePartId,
    MalformedRow,
    MissingParent,
    SynonymMapError,
    UnknownPart,
)
from .graph import Graph, ensure_concept

Source = Union[str, IO[str]]

BOM_COLUMNS = ["part_id", "parent_id", "part_name", "level", "quantity"]
FMEA_COLUMNS = [
    "fmea_id", "fmea_type", "part_id", "failure_mode", "cause", "effect", "detection", "prevention",
]
CLAIM_COLUMNS = ["claim_id", "part_id", "claim_text", "date"]
SYNONYM_COLUMNS = ["term", "canonical"]


# --- synonym normalization -------------------------------------------------


@dataclass
class SynonymMap:
    """Ordered term -> canonical rewrites for domain shorthand.

    Terms are matched whole-word and case-insensitively, longest term first,
    in a single left-to-right pass (replacements are never re-scanned).
    A canonical form may not itself be a mapped term, which makes
    normalization idempotent.
    """

    entries: list[tuple[str, str]] = field(default_factory=list)

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for term, canonical in self.entries:
            if not term:
                raise SynonymMapError("empty synonym term")
            folded = term.casefold()
            if folded in seen:
                raise SynonymMapError(f"duplicate synonym term {term!r}")
            seen.add(folded)
        for _, canonical in self.entries:
            if canonical.casefold() in seen:
                raise SynonymMapError(
                    f"canonical form {canonical!r} is itself a mapped term (rewrite chain)"
                )
        self._lookup = {term.casefold(): canonical for term, canonical in self.entries}
        if self.entries:
            alternation = "|".join(
                re.escape(term) for term in sorted(self._lookup, key=len, reverse=True)
            )
            self._pattern = re.compile(rf"\b(?:{alternation})\b", re.IGNORECASE)
        else:
            self._pattern = None
        # canonicals must be fixed points of the rewrite, or normalization
        # would not be idempotent
        for _, canonical in self.entries:
            if self.apply(canonical) != canonical:
                raise SynonymMapError(
                    f"canonical form {canonical!r} contains a mapped term (rewrite chain)"
                )

    def apply(self, text: str) -> str:
        if self._pattern is None or not text:
            return text
        return self._pattern.sub(lambda m: self._lookup[m.group(0).casefold()], text)

    @classmethod
    def empty(cls) -> "SynonymMap":
        return cls([])


def normalize_text(text: str, synonyms: SynonymMap) -> str:
    """Replace each whole-word occurrence of a mapped term by its canonical
    form; everything else is returned byte-identical."""
    return synonyms.apply(text)


def load_synonyms(source: Source) -> SynonymMap:
    rows = _read_csv(source, SYNONYM_COLUMNS)
    return SynonymMap([(term, canonical) for _, (term, canonical) in rows])


# --- parsed row types -------------------------------------------------------


@dataclass
class BomRow:
    part_id: str
    parent_id: Optional[str]
    part_name: str
    level: int
    quantity: int


@dataclass
class FmeaRecord:
    fmea_id: str
    fmea_type: str  # D or P
    part_id: str
    failure_mode: str
    cause: str
    effect: str = ""
    detection: str = ""
    prevention: str = ""


@dataclass
class ClaimRecord:
    claim_id: str
    part_id: str
    claim_text: str
    date: str


# --- CSV plumbing -----------------------------------------------------------


def _read_csv(source: Source, columns: list[str]) -> list[tuple[int, list[str]]]:
    """Rows as (line number, values); validates the header and column count."""
    if isinstance(source, str):
        fh: IO[str] = open(source, "r", encoding="utf-8", newline="")
        close = True
    else:
        fh = source
        close = False
    try:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedRow(f"missing header row, expected {','.join(columns)}", line=1)
        if [h.strip() for h in header] != columns:
            raise MalformedRow(
                f"bad header {','.join(header)!r}, expected {','.join(columns)}", line=1
            )
        rows = []
        for values in reader:
            if not values:
                continue
            if len(values) != len(columns):
                raise MalformedRow(
                    f"expected {len(columns)} columns, found {len(values)}", line=reader.line_num
                )
            rows.append((reader.line_num, values))
        return rows
    finally:
        if close:
            fh.close()


def _canon(text: str) -> str:
    """Chain-key canonicalization: Unicode casefold + whitespace collapse."""
    return " ".join(text.casefold().split())


def _existing_ids(graph: Graph, label: str) -> dict[str, int]:
    out: dict[str, int] = {}
    for node in graph.nodes_with_label(label):
        ext = node.props.get("id")
        if isinstance(ext, str):
            out.setdefault(ext, node.id)
    return out


# --- BOM ---------------------------------------------------------------------


def load_bom(graph: Graph, source: Source) -> dict:
    """Create one Part node per row (upsert on part_id) plus HAS_CHILD edges.

    Returns {"parts_created", "edges_created", "root_id"} where root_id is
    the internal node id of the root part.
    """
    raw = _read_csv(source, BOM_COLUMNS)
    rows: list[tuple[int, BomRow]] = []
    by_id: dict[str, tuple[int, BomRow]] = {}
    root: Optional[BomRow] = None
    for line, (part_id, parent_id, part_name, level, quantity) in raw:
        part_id = part_id.strip()
        parent_id = parent_id.strip()
        if not part_id:
            raise MalformedRow("empty part_id", line=line)
        try:
            level_n = int(level)
            quantity_n = int(quantity)
        except ValueError:
            raise MalformedRow(f"level/quantity must be integers, got {level!r}/{quantity!r}", line=line)
        if level_n < 0 or quantity_n < 1:
            raise MalformedRow("level must be >= 0 and quantity >= 1", line=line)
        if part_id in by_id:
            raise DuplicatePartId(f"part_id {part_id!r} appears twice", part_id=part_id, line=line)
        row = BomRow(part_id, parent_id or None, part_name, level_n, quantity_n)
        by_id[part_id] = (line, row)
        rows.append((line, row))
        if row.parent_id is None:
            if root is not None:
                raise MalformedRow(
                    f"second root row {part_id!r}; exactly one row may have an empty parent_id",
                    line=line,
                )
            root = row
    if root is None:
        raise MalformedRow("no root row (empty parent_id) in file", line=0)
    for line, row in rows:
        if row.parent_id is not None and row.parent_id not in by_id:
            raise MissingParent(
                f"row {row.part_id!r} references unknown parent {row.parent_id!r}",
                part_id=row.part_id,
                parent_id=row.parent_id,
            )
    _check_bom_acyclic(rows)

    # validation done; apply
    concept = ensure_concept(graph, "Part")
    existing = _existing_ids(graph, "Part")
    parts_created = 0
    node_ids: dict[str, int] = {}
    for _, row in rows:
        props = {"id": row.part_id, "name": row.part_name, "level": row.level, "quantity": row.quantity}
        node_id = graph.create_node(["Part"], props, upsert_key="id")
        if row.part_id not in existing:
            parts_created += 1
        node_ids[row.part_id] = node_id
        graph.create_edge("INSTANCE_OF", node_id, concept, dedupe=True)
    edges_created = 0
    for _, row in rows:
        if row.parent_id is None:
            continue
        before = graph.edge_count()
        graph.create_edge("HAS_CHILD", node_ids[row.parent_id], node_ids[row.part_id], dedupe=True)
        edges_created += graph.edge_count() - before
    return {
        "parts_created": parts_created,
        "edges_created": edges_created,
        "root_id": node_ids[root.part_id],
    }


def _check_bom_acyclic(rows: list[tuple[int, BomRow]]) -> None:
    parent = {row.part_id: row.parent_id for _, row in rows}
    state: dict[str, int] = {}  # 1 = on current path, 2 = proven acyclic
    for _, row in rows:
        path: list[str] = []
        current: Optional[str] = row.part_id
        while current is not None and state.get(current) != 2:
            if state.get(current) == 1:
                cycle_start = path.index(current)
                raise CycleDetected(path[cycle_start:] + [current])
            state[current] = 1
            path.append(current)
            current = parent[current]
        for part in path:
            state[part] = 2


# --- FMEA ---------------------------------------------------------------------


def load_fmea(
    graph: Graph,
    source: Source,
    synonyms: SynonymMap,
    allow_orphans: bool = False,
) -> dict:
    """Create FailureMode/Cause/Effect/Detection/Prevention chains.

    Chain key is (fmea_type, part_id, canonical failure text, canonical
    cause text); rows whose key already exists (in the file or the graph)
    are counted as duplicates and skipped.
    """
    raw = _read_csv(source, FMEA_COLUMNS)
    records: list[tuple[int, FmeaRecord]] = []
    for line, values in raw:
        fmea_id, fmea_type, part_id, failure_mode, cause, effect, detection, prevention = values
        fmea_type = fmea_type.strip().upper()
        if fmea_type not in ("D", "P"):
            raise MalformedRow(f"fmea_type must be D or P, got {fmea_type!r}", line=line)
        if not failure_mode.strip() or not cause.strip():
            raise MalformedRow("failure_mode and cause must be non-empty", line=line)
        record = FmeaRecord(
            fmea_id=fmea_id.strip(),
            fmea_type=fmea_type,
            part_id=part_id.strip(),
            failure_mode=normalize_text(failure_mode.strip(), synonyms),
            cause=normalize_text(cause.strip(), synonyms),
            effect=normalize_text(effect.strip(), synonyms),
            detection=normalize_text(detection.strip(), synonyms),
            prevention=normalize_text(prevention.strip(), synonyms),
        )
        records.append((line, record))

    parts = _existing_ids(graph, "Part")
    if not allow_orphans:
        for line, record in records:
            if record.part_id not in parts:
                raise UnknownPart(
                    f"FMEA row references unknown part {record.part_id!r}",
                    part_id=record.part_id,
                    line=line,
                )

    concepts = {
        name: ensure_concept(graph, name)
        for name in ("Part", "FailureMode", "Cause", "Effect", "Detection", "Prevention")
    }
    index = _FmeaIndex.scan(graph, parts)
    chains_created = 0
    duplicates_dropped = 0
    for _, record in records:
        part_node = parts.get(record.part_id)
        if part_node is None:
            props = {"id": record.part_id, "name": record.part_id, "placeholder": True}
            part_node = graph.create_node(["Part"], props, upsert_key="id")
            graph.create_edge("INSTANCE_OF", part_node, concepts["Part"], dedupe=True)
            parts[record.part_id] = part_node
        chain_key = (record.fmea_type, record.part_id, _canon(record.failure_mode), _canon(record.cause))
        if chain_key in index.chains:
            duplicates_dropped += 1
            continue
        chains_created += 1
        failure_key = chain_key[:3]
        failure_node = index.failures.get(failure_key)
        if failure_node is None:
            failure_node = graph.create_node(
                ["FailureMode"],
                {"text": record.failure_mode, "fmea_type": record.fmea_type, "fmea_id": record.fmea_id},
            )
            graph.create_edge("INSTANCE_OF", failure_node, concepts["FailureMode"], dedupe=True)
            graph.create_edge("HAS_FAILURE_MODE", part_node, failure_node, dedupe=True)
            index.failures[failure_key] = failure_node
        cause_node = graph.create_node(["Cause"], {"text": record.cause})
        graph.create_edge("INSTANCE_OF", cause_node, concepts["Cause"], dedupe=True)
        graph.create_edge("HAS_CAUSE", failure_node, cause_node, dedupe=True)
        index.chains.add(chain_key)
        for text, label, edge_type in (
            (record.effect, "Effect", "HAS_EFFECT"),
            (record.detection, "Detection", "DETECTED_BY"),
            (record.prevention, "Prevention", "PREVENTED_BY"),
        ):
            if not text:
                continue
            side_key = (failure_node, label, _canon(text))
            side_node = index.sides.get(side_key)
            if side_node is None:
                side_node = graph.create_node([label], {"text": text})
                graph.create_edge("INSTANCE_OF", side_node, concepts[label], dedupe=True)
                graph.create_edge(edge_type, failure_node, side_node, dedupe=True)
                index.sides[side_key] = side_node
    return {
        "records_read": len(records),
        "chains_created": chains_created,
        "duplicates_dropped": duplicates_dropped,
    }


class _FmeaIndex:
    """Existing chain keys and per-failure side nodes, rebuilt per load."""

    def __init__(self) -> None:
        self.chains: set[tuple] = set()
        self.failures: dict[tuple, int] = {}
        self.sides: dict[tuple, int] = {}

    @classmethod
    def scan(cls, graph: Graph, parts: dict[str, int]) -> "_FmeaIndex":
        index = cls()
        for part_id, part_node in parts.items():
            for _, failure in graph.neighbors(part_node, "out", "HAS_FAILURE_MODE"):
                fmea_type = failure.props.get("fmea_type", "")
                failure_key = (fmea_type, part_id, _canon(str(failure.props.get("text", ""))))
                index.failures.setdefault(failure_key, failure.id)
                for _, cause in graph.neighbors(failure.id, "out", "HAS_CAUSE"):
                    index.chains.add(failure_key + (_canon(str(cause.props.get("text", ""))),))
                for label, edge_type in (
                    ("Effect", "HAS_EFFECT"),
                    ("Detection", "DETECTED_BY"),
                    ("Prevention", "PREVENTED_BY"),
                ):
                    for _, side in graph.neighbors(failure.id, "out", edge_type):
                        key = (failure.id, label, _canon(str(side.props.get("text", ""))))
                        index.sides.setdefault(key, side.id)
        return index


# --- warranty claims -----------------------------------------------------------


def load_claims(graph: Graph, source: Source, synonyms: SynonymMap) -> dict:
    """Create WarrantyClaim nodes carrying both normalized and raw text.

    A claim_id already in the graph is skipped when the row is identical
    (idempotent re-ingest) and rejected otherwise.
    """
    raw = _read_csv(source, CLAIM_COLUMNS)
    records: list[tuple[int, ClaimRecord]] = []
    seen: set[str] = set()
    for line, (claim_id, part_id, claim_text, date) in raw:
        claim_id = claim_id.strip()
        part_id = part_id.strip()
        if not claim_id:
            raise MalformedRow("empty claim_id", line=line)
        if not claim_text.strip():
            raise MalformedRow("empty claim_text", line=line)
        if claim_id in seen:
            raise DuplicateClaimId(f"claim_id {claim_id!r} appears twice", claim_id=claim_id, line=line)
        seen.add(claim_id)
        try:
            datetime.date.fromisoformat(date.strip())
        except ValueError:
            raise MalformedRow(f"date {date!r} is not an ISO-8601 date", line=line)
        records.append((line, ClaimRecord(claim_id, part_id, claim_text, date.strip())))

    parts = _existing_ids(graph, "Part")
    existing_claims = {
        node.props.get("id"): node
        for node in graph.nodes_with_label("WarrantyClaim")
    }
    for line, record in records:
        if record.part_id not in parts:
            raise UnknownPart(
                f"claim references unknown part {record.part_id!r}",
                part_id=record.part_id,
                line=line,
            )
        node = existing_claims.get(record.claim_id)
        if node is not None:
            same = (
                node.props.get("raw_text") == record.claim_text
                and node.props.get("date") == record.date
                and _claim_part(graph, node.id, parts) == record.part_id
            )
            if not same:
                raise DuplicateClaimId(
                    f"claim_id {record.claim_id!r} already ingested with different content",
                    claim_id=record.claim_id,
                    line=line,
                )

    concept = ensure_concept(graph, "WarrantyClaim")
    claims_created = 0
    for _, record in records:
        if record.claim_id in existing_claims:
            continue
        props = {
            "id": record.claim_id,
            "text": normalize_text(record.claim_text, synonyms),
            "raw_text": record.claim_text,
            "date": record.date,
        }
        node_id = graph.create_node(["WarrantyClaim"], props)
        graph.create_edge("INSTANCE_OF", node_id, concept, dedupe=True)
        graph.create_edge("CLAIM_FOR", node_id, parts[record.part_id], dedupe=True)
        claims_created += 1
    return {"claims_created": claims_created}


def _claim_part(graph: Graph, claim_node: int, parts: dict[str, int]) -> Optional[str]:
    for _, part in graph.neighbors(claim_node, "out", "CLAIM_FOR"):
        ext = part.props.get("id")
        if isinstance(ext, str):
            return ext
    return None


def csv_source(text: str) -> IO[str]:
    """Wrap an in-memory CSV body (e.g. an HTTP upload) as a loader source."""
    return io.StringIO(text)
