"""Causal-chain extraction and the risk-evaluation text block.

A chain is the one-level neighborhood of a failure mode: its owning part,
its causes, effects, detections and preventions. When a deviation node is
given, match similarities are copied from its SIMILAR_TO edges and matched
elements sort before unmatched ones.

The risk-text template is frozen (it enters an approval workflow):

    RISK: <failure text>\\n
    then per cause:        "  CAUSE: <cause text>\\n"
    then, when provided:   "  JUSTIFICATION: <text>\\n"
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .errors import NotAFailureMode
from .graph import Graph


@dataclass
class ChainEntry:
    node_id: int
    text: str
    similarity: Optional[float] = None


@dataclass
class CausalChain:
    part_id: Optional[int]
    part_name: str
    failure_id: int
    failure_text: str
    causes: list[ChainEntry]
    effects: list[ChainEntry]
    detections: list[ChainEntry]
    preventions: list[ChainEntry]


_CHAIN_EDGES = (
    ("HAS_CAUSE", "causes"),
    ("HAS_EFFECT", "effects"),
    ("DETECTED_BY", "detections"),
    ("PREVENTED_BY", "preventions"),
)


def chain_for(graph: Graph, failure: int, deviation: Optional[int] = None) -> CausalChain:
    """The explanation chain behind one failure mode.

    Lists sort by similarity desc then node id asc, with unmatched elements
    after matched ones. Raises UnknownNode / NotAFailureMode.
    """
    failure_node = graph.node(failure)
    if "FailureMode" not in failure_node.labels:
        raise NotAFailureMode(
            f"node {failure} is not a FailureMode (labels: {sorted(failure_node.labels)})",
            node_id=failure,
        )
    similarities: dict[int, float] = {}
    if deviation is not None:
        graph.node(deviation)
        for edge, target in graph.neighbors(deviation, "out", "SIMILAR_TO"):
            score = edge.props.get("score")
            if isinstance(score, (int, float)) and not isinstance(score, bool):
                similarities[target.id] = float(score)

    part_id: Optional[int] = None
    part_name = ""
    owners = graph.neighbors(failure, "in", "HAS_FAILURE_MODE")
    if owners:
        part = owners[0][1]
        part_id = part.id
        part_name = str(part.props.get("name", ""))

    lists: dict[str, list[ChainEntry]] = {name: [] for _, name in _CHAIN_EDGES}
    for edge_type, name in _CHAIN_EDGES:
        for _, node in graph.neighbors(failure, "out", edge_type):
            entry = ChainEntry(node.id, str(node.props.get("text", "")), similarities.get(node.id))
            lists[name].append(entry)
        lists[name].sort(
            key=lambda e: (0, -e.similarity, e.node_id) if e.similarity is not None else (1, 0.0, e.node_id)
        )
    return CausalChain(
        part_id=part_id,
        part_name=part_name,
        failure_id=failure,
        failure_text=str(failure_node.props.get("text", "")),
        causes=lists["causes"],
        effects=lists["effects"],
        detections=lists["detections"],
        preventions=lists["preventions"],
    )


def render_risk_text(chain: CausalChain, justification: Optional[str] = None) -> str:
    """The plain-text block inserted into the risk-evaluation field."""
    out = f"RISK: {chain.failure_text}\n"
    for cause in chain.causes:
        out += f"  CAUSE: {cause.text}\n"
    if justification is not None and justification != "":
        out += f"  JUSTIFICATION: {justification}\n"
    return out
