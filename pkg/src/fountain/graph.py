"""Embedded labelled property graph.

Holds both layers of the knowledge representation: concept nodes (label
``Concept`` with a ``name`` property) and instance nodes attached to their
concept via ``INSTANCE_OF`` edges. Internal ids are dense integers assigned
at creation; external identifiers live in the ``id`` property.

Concurrency: multi-reader / single-writer. Mutations are serialized on an
internal lock; concurrent writers are not supported.
"""

from __future__ import annotations

import json
import math
import os
import threading
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Union

from .errors import (
    CorruptRecord,
    DanglingEndpoint,
    EmptyLabels,
    FormatVersionMismatch,
    SnapshotIoError,
    UnknownNode,
    UpsertConflict,
)

PropValue = Union[str, float, int, bool]

SNAPSHOT_FORMAT = "fountain-graph"
SNAPSHOT_VERSION = 1

# Schema vocabulary shared by ingestion, linking and explanation.
CONCEPT_LABEL = "Concept"
INSTANCE_LABELS = (
    "Part",
    "Process",
    "FailureMode",
    "Cause",
    "Effect",
    "Detection",
    "Prevention",
    "Deviation",
    "WarrantyClaim",
)
EDGE_TYPES = (
    "HAS_CHILD",
    "HAS_FAILURE_MODE",
    "HAS_CAUSE",
    "HAS_EFFECT",
    "DETECTED_BY",
    "PREVENTED_BY",
    "INSTANCE_OF",
    "CONCERNS_PART",
    "CLAIM_FOR",
    "SIMILAR_TO",
)


def kind_of(value: PropValue) -> str:
    """Classify a property value into one of the four supported kinds.

    ``bool`` must be checked before ``int`` (bool subclasses int in Python).
    """
    if isinstance(value, bool):
        return "flag"
    if isinstance(value, int):
        return "integer"
    if isinstance(value, float):
        return "number"
    if isinstance(value, str):
        return "text"
    raise TypeError(f"unsupported property value type: {type(value).__name__}")


def values_equal(a: PropValue, b: PropValue) -> bool:
    """Kind-strict equality: values of different kinds are never equal."""
    return kind_of(a) == kind_of(b) and a == b


def _validate_props(props: dict[str, PropValue]) -> None:
    for key, value in props.items():
        kind = kind_of(value)  # raises TypeError on unsupported types
        if kind == "number" and not math.isfinite(value):
            raise TypeError(f"non-finite number for property '{key}'")


@dataclass(eq=True)
class Node:
    id: int
    labels: frozenset[str]
    props: dict[str, PropValue]


@dataclass(eq=True)
class Edge:
    id: int
    type: str
    src: int
    dst: int
    props: dict[str, PropValue]


class Graph:
    def __init__(self) -> None:
        self._nodes: dict[int, Node] = {}
        self._edges: dict[int, Edge] = {}
        self._out: dict[int, list[int]] = {}
        self._in: dict[int, list[int]] = {}
        self._label_index: dict[str, set[int]] = {}
        # (prop key, kind, value) -> node ids; backs the upsert lookup
        self._prop_index: dict[tuple[str, str, PropValue], set[int]] = {}
        # (type, src, dst) -> edge id; backs edge dedupe
        self._edge_key_index: dict[tuple[str, int, int], int] = {}
        self._next_node_id = 0
        self._next_edge_id = 0
        self._write_lock = threading.Lock()

    # -- basic access ------------------------------------------------------

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self._nodes == other._nodes and self._edges == other._edges

    def node_count(self) -> int:
        return len(self._nodes)

    def edge_count(self) -> int:
        return len(self._edges)

    def has_node(self, node_id: int) -> bool:
        return node_id in self._nodes

    def node(self, node_id: int) -> Node:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise UnknownNode(f"no node with id {node_id}", node_id=node_id) from None

    def edge(self, edge_id: int) -> Edge:
        return self._edges[edge_id]

    def nodes(self) -> Iterator[Node]:
        """All nodes in ascending internal-id order."""
        for node_id in sorted(self._nodes):
            yield self._nodes[node_id]

    def edges(self) -> Iterator[Edge]:
        for edge_id in sorted(self._edges):
            yield self._edges[edge_id]

    def nodes_with_label(self, label: str) -> list[Node]:
        return [self._nodes[i] for i in sorted(self._label_index.get(label, ()))]

    # -- mutation ----------------------------------------------------------

    def create_node(
        self,
        labels: Iterable[str],
        props: dict[str, PropValue],
        upsert_key: Optional[str] = None,
    ) -> int:
        label_set = frozenset(labels)
        if not label_set:
            raise EmptyLabels("a node needs at least one label")
        _validate_props(props)
        if upsert_key is not None and upsert_key not in props:
            raise KeyError(f"upsert key '{upsert_key}' missing from props")
        with self._write_lock:
            if upsert_key is not None:
                value = props[upsert_key]
                hits = self._prop_index.get((upsert_key, kind_of(value), value), set())
                same_labels = sorted(i for i in hits if self._nodes[i].labels == label_set)
                if same_labels:
                    return same_labels[0]
                if hits:
                    raise UpsertConflict(
                        f"node with {upsert_key}={value!r} exists under different labels",
                        key=upsert_key,
                        value=value,
                    )
            return self._insert_node(label_set, dict(props))

    def _insert_node(self, labels: frozenset[str], props: dict[str, PropValue]) -> int:
        node_id = self._next_node_id
        self._next_node_id += 1
        node = Node(node_id, labels, props)
        self._nodes[node_id] = node
        self._out[node_id] = []
        self._in[node_id] = []
        for label in labels:
            self._label_index.setdefault(label, set()).add(node_id)
        for key, value in props.items():
            self._prop_index.setdefault((key, kind_of(value), value), set()).add(node_id)
        return node_id

    def create_edge(
        self,
        type: str,
        src: int,
        dst: int,
        props: Optional[dict[str, PropValue]] = None,
        dedupe: bool = False,
    ) -> int:
        if not type:
            raise ValueError("edge type must be non-empty")
        props = dict(props or {})
        _validate_props(props)
        if src not in self._nodes or dst not in self._nodes:
            missing = src if src not in self._nodes else dst
            raise DanglingEndpoint(f"edge endpoint {missing} does not exist", node_id=missing)
        with self._write_lock:
            if dedupe:
                existing = self._edge_key_index.get((type, src, dst))
                if existing is not None:
                    return existing
            return self._insert_edge(type, src, dst, props)

    def _insert_edge(self, type: str, src: int, dst: int, props: dict[str, PropValue]) -> int:
        edge_id = self._next_edge_id
        self._next_edge_id += 1
        edge = Edge(edge_id, type, src, dst, props)
        self._edges[edge_id] = edge
        self._out[src].append(edge_id)
        self._in[dst].append(edge_id)
        self._edge_key_index.setdefault((type, src, dst), edge_id)
        return edge_id

    # -- traversal ---------------------------------------------------------

    def neighbors(
        self,
        node_id: int,
        direction: str = "out",
        type_filter: Optional[str] = None,
    ) -> list[tuple[Edge, Node]]:
        """Incident edges with the node on the far side, ascending edge id.

        ``direction`` is ``out``, ``in`` or ``both``; for ``both`` a self-loop
        appears twice (once per direction), matching multiset semantics.
        """
        if node_id not in self._nodes:
            raise UnknownNode(f"no node with id {node_id}", node_id=node_id)
        if direction not in ("out", "in", "both"):
            raise ValueError(f"bad direction {direction!r}")
        edge_ids: list[tuple[int, bool]] = []
        if direction in ("out", "both"):
            edge_ids += [(i, True) for i in self._out[node_id]]
        if direction in ("in", "both"):
            edge_ids += [(i, False) for i in self._in[node_id]]
        result = []
        for edge_id, outgoing in sorted(edge_ids):
            edge = self._edges[edge_id]
            if type_filter is not None and edge.type != type_filter:
                continue
            other = edge.dst if outgoing else edge.src
            result.append((edge, self._nodes[other]))
        return result

    def out_edge_ids(self, node_id: int) -> list[int]:
        return self._out[node_id]

    def in_edge_ids(self, node_id: int) -> list[int]:
        return self._in[node_id]

    def descendants(
        self,
        root: int,
        edge_type: str,
        max_depth: Optional[int] = None,
    ) -> set[int]:
        """Node ids reachable from ``root`` via <= max_depth hops of ``edge_type``.

        Excludes the root itself; a visited set guarantees termination on
        cyclic input. ``max_depth=None`` means unbounded.
        """
        if root not in self._nodes:
            raise UnknownNode(f"no node with id {root}", node_id=root)
        visited = {root}
        found: set[int] = set()
        frontier = [root]
        depth = 0
        while frontier and (max_depth is None or depth < max_depth):
            depth += 1
            next_frontier = []
            for node_id in frontier:
                for edge_id in self._out[node_id]:
                    edge = self._edges[edge_id]
                    if edge.type != edge_type or edge.dst in visited:
                        continue
                    visited.add(edge.dst)
                    found.add(edge.dst)
                    next_frontier.append(edge.dst)
            frontier = next_frontier
        return found

    # -- snapshot persistence ----------------------------------------------

    def snapshot_save(self, path: str) -> int:
        """Write the graph as line-delimited JSON; returns the record count.

        The file is written to a temp sibling and renamed into place so a
        crash mid-save never clobbers an existing snapshot.
        """
        tmp = f"{path}.tmp"
        count = 0
        try:
            with open(tmp, "w", encoding="utf-8") as fh:
                fh.write(json.dumps({"format": SNAPSHOT_FORMAT, "version": SNAPSHOT_VERSION}) + "\n")
                for node in self.nodes():
                    record = {
                        "kind": "node",
                        "id": node.id,
                        "labels": sorted(node.labels),
                        "props": node.props,
                    }
                    fh.write(json.dumps(record, allow_nan=False) + "\n")
                    count += 1
                for edge in self.edges():
                    record = {
                        "kind": "edge",
                        "id": edge.id,
                        "type": edge.type,
                        "from": edge.src,
                        "to": edge.dst,
                        "props": edge.props,
                    }
                    fh.write(json.dumps(record, allow_nan=False) + "\n")
                    count += 1
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, path)
        except OSError as exc:
            raise SnapshotIoError(f"cannot write snapshot to {path}: {exc}") from exc
        return count

    @classmethod
    def snapshot_load(cls, path: str) -> "Graph":
        try:
            fh = open(path, "r", encoding="utf-8")
        except OSError as exc:
            raise SnapshotIoError(f"cannot read snapshot from {path}: {exc}") from exc
        graph = cls()
        with fh:
            header_line = fh.readline()
            if not header_line:
                raise FormatVersionMismatch(f"{path} is empty, expected a snapshot header")
            try:
                header = json.loads(header_line)
            except json.JSONDecodeError:
                raise CorruptRecord("unparseable snapshot header", line=1) from None
            if not isinstance(header, dict) or header.get("format") != SNAPSHOT_FORMAT:
                raise FormatVersionMismatch(f"not a {SNAPSHOT_FORMAT} file")
            if header.get("version") != SNAPSHOT_VERSION:
                raise FormatVersionMismatch(
                    f"snapshot version {header.get('version')!r}, supported: {SNAPSHOT_VERSION}"
                )
            seen_edge = False
            for line_no, line in enumerate(fh, start=2):
                stripped = line.strip()
                if not stripped:
                    continue
                try:
                    record = json.loads(stripped)
                except json.JSONDecodeError:
                    raise CorruptRecord("unparseable record", line=line_no) from None
                try:
                    kind = record["kind"]
                    if kind == "node":
                        if seen_edge:
                            raise CorruptRecord("node record after edge records", line=line_no)
                        graph._load_node(record)
                    elif kind == "edge":
                        seen_edge = True
                        graph._load_edge(record)
                    else:
                        raise CorruptRecord(f"unknown record kind {kind!r}", line=line_no)
                except CorruptRecord:
                    raise
                except (KeyError, TypeError, ValueError) as exc:
                    raise CorruptRecord(f"bad record: {exc}", line=line_no) from None
        return graph

    def _load_node(self, record: dict) -> None:
        node_id = record["id"]
        labels = frozenset(record["labels"])
        props = record["props"]
        if not isinstance(node_id, int) or isinstance(node_id, bool):
            raise ValueError("node id must be an integer")
        if node_id in self._nodes:
            raise ValueError(f"duplicate node id {node_id}")
        if not labels:
            raise ValueError("node without labels")
        _validate_props(props)
        node = Node(node_id, labels, props)
        self._nodes[node_id] = node
        self._out[node_id] = []
        self._in[node_id] = []
        for label in labels:
            self._label_index.setdefault(label, set()).add(node_id)
        for key, value in props.items():
            self._prop_index.setdefault((key, kind_of(value), value), set()).add(node_id)
        self._next_node_id = max(self._next_node_id, node_id + 1)

    def _load_edge(self, record: dict) -> None:
        edge_id = record["id"]
        src, dst = record["from"], record["to"]
        if not isinstance(edge_id, int) or isinstance(edge_id, bool):
            raise ValueError("edge id must be an integer")
        if edge_id in self._edges:
            raise ValueError(f"duplicate edge id {edge_id}")
        if src not in self._nodes or dst not in self._nodes:
            raise ValueError(f"edge {edge_id} references a missing node")
        props = record["props"]
        _validate_props(props)
        edge = Edge(edge_id, record["type"], src, dst, props)
        self._edges[edge_id] = edge
        self._out[src].append(edge_id)
        self._in[dst].append(edge_id)
        self._edge_key_index.setdefault((edge.type, src, dst), edge_id)
        self._next_edge_id = max(self._next_edge_id, edge_id + 1)
        # adjacency lists must stay in ascending edge-id order
        if len(self._out[src]) > 1 and self._out[src][-2] > edge_id:
            self._out[src].sort()
        if len(self._in[dst]) > 1 and self._in[dst][-2] > edge_id:
            self._in[dst].sort()

    def watermark(self) -> tuple[int, int]:
        """Current id allocator state; pair with :meth:`records_since`."""
        return (self._next_node_id, self._next_edge_id)

    def records_since(self, watermark: tuple[int, int]) -> list[dict]:
        """Snapshot-format records for everything created after ``watermark``
        (nodes first, ascending id) — the delta a write-ahead log persists."""
        node_floor, edge_floor = watermark
        records = [
            node_record(self._nodes[i]) for i in range(node_floor, self._next_node_id)
            if i in self._nodes
        ]
        records += [
            edge_record(self._edges[i]) for i in range(edge_floor, self._next_edge_id)
            if i in self._edges
        ]
        return records

    # -- record-level insert (used by the deviation write-ahead log) --------

    def insert_record(self, record: dict) -> None:
        """Insert a node/edge record in snapshot schema with its id preserved.

        Used when replaying a write-ahead log on top of a loaded snapshot;
        records whose id already exists are skipped.
        """
        if record["kind"] == "node":
            if record["id"] in self._nodes:
                return
            self._load_node(record)
        elif record["kind"] == "edge":
            if record["id"] in self._edges:
                return
            self._load_edge(record)
        else:
            raise ValueError(f"unknown record kind {record['kind']!r}")


def node_record(node: Node) -> dict:
    return {"kind": "node", "id": node.id, "labels": sorted(node.labels), "props": node.props}


def edge_record(edge: Edge) -> dict:
    return {
        "kind": "edge",
        "id": edge.id,
        "type": edge.type,
        "from": edge.src,
        "to": edge.dst,
        "props": edge.props,
    }


def ensure_concept(graph: Graph, name: str) -> int:
    """Upsert the concept-layer node for an instance label."""
    return graph.create_node([CONCEPT_LABEL], {"name": name}, upsert_key="name")
