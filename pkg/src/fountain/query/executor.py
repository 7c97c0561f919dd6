"""Pattern matcher and projection for the query subset.

Semantics:
- relationship-isomorphism: an edge is used at most once per match, nodes
  may repeat;
- comparisons between different value kinds (text / number / integer /
  flag) are false, never errors; missing properties compare false;
- result order is deterministic: matches sort lexicographically by the
  bound internal ids, interleaved in pattern order (n0, e0, n1, ...).

Execution seeds the pattern at the node pattern with the most selective
constraint (exact property match, then label, then unconstrained) and
extends along the path by backtracking.
"""

from __future__ import annotations

from typing import Optional, Union

from ..errors import MissingParam
from ..graph import Edge, Graph, Node, PropValue, kind_of, values_equal
from .ast import Comparand, Literal, NodePattern, Param, QueryAst

ResultValue = Union[Node, Edge, PropValue, None]
ResultRow = list


def _resolve(value, params: dict[str, PropValue]) -> PropValue:
    if isinstance(value, Param):
        if value.name not in params:
            raise MissingParam(value.name)
        return params[value.name]
    assert isinstance(value, Literal)
    return value.value


def compare(lhs: Optional[PropValue], op: str, rhs: Optional[PropValue]) -> bool:
    """Kind-strict predicate evaluation shared by WHERE and tests."""
    if lhs is None or rhs is None:
        return False
    if op == "CONTAINS":
        return isinstance(lhs, str) and isinstance(rhs, str) and rhs in lhs
    if kind_of(lhs) != kind_of(rhs):
        return False
    if op == "=":
        return lhs == rhs
    if op == "<>":
        return lhs != rhs
    if op == "<":
        return lhs < rhs
    if op == "<=":
        return lhs <= rhs
    if op == ">":
        return lhs > rhs
    if op == ">=":
        return lhs >= rhs
    raise ValueError(f"unknown operator {op!r}")


class _CompiledNode:
    __slots__ = ("label", "props")

    def __init__(self, pattern: NodePattern, params: dict[str, PropValue]):
        self.label = pattern.label
        self.props = [(k, _resolve(v, params)) for k, v in pattern.props]

    def matches(self, node: Node) -> bool:
        if self.label is not None and self.label not in node.labels:
            return False
        for key, want in self.props:
            have = node.props.get(key)
            if have is None or not values_equal(have, want):
                return False
        return True

    def selectivity(self) -> int:
        if self.props:
            return 0
        if self.label is not None:
            return 1
        return 2


def execute(ast: QueryAst, params: dict[str, PropValue], graph: Graph) -> list[ResultRow]:
    """All pattern matches, filtered by WHERE, projected and truncated."""
    for name in sorted(ast.params()):
        if name not in params:
            raise MissingParam(name)

    compiled = [_CompiledNode(n, params) for n in ast.nodes]
    n_nodes = len(compiled)

    seed = min(range(n_nodes), key=lambda i: (compiled[i].selectivity(), i))
    if compiled[seed].label is not None:
        seed_candidates = graph.nodes_with_label(compiled[seed].label)
    else:
        seed_candidates = list(graph.nodes())

    matches: list[tuple[list[Node], list[Edge]]] = []
    nodes_bound: list[Optional[Node]] = [None] * n_nodes
    edges_bound: list[Optional[Edge]] = [None] * len(ast.rels)

    def where_ok() -> bool:
        var_map = {}
        for pattern, node in zip(ast.nodes, nodes_bound):
            if pattern.var:
                var_map[pattern.var] = node
        for pattern, edge in zip(ast.rels, edges_bound):
            if pattern.var:
                var_map[pattern.var] = edge
        for pred in ast.where:
            lhs = _comparand_value(pred.lhs, var_map, params)
            rhs = _comparand_value(pred.rhs, var_map, params)
            if not compare(lhs, pred.op, rhs):
                return False
        return True

    def extend_right(i: int) -> None:
        # rel i connects node i -> node i+1; node i is bound
        if i == len(ast.rels):
            extend_left(seed - 1)
            return
        rel = ast.rels[i]
        here = nodes_bound[i]
        edge_ids = graph.out_edge_ids(here.id) if rel.direction == "right" else graph.in_edge_ids(here.id)
        for edge_id in edge_ids:
            edge = graph.edge(edge_id)
            if rel.type is not None and edge.type != rel.type:
                continue
            if any(e is not None and e.id == edge_id for e in edges_bound):
                continue
            other = graph.node(edge.dst if rel.direction == "right" else edge.src)
            if not compiled[i + 1].matches(other):
                continue
            edges_bound[i] = edge
            nodes_bound[i + 1] = other
            extend_right(i + 1)
            edges_bound[i] = None
            nodes_bound[i + 1] = None

    def extend_left(i: int) -> None:
        # rel i connects node i -> node i+1; node i+1 is bound
        if i < 0:
            if where_ok():
                matches.append((list(nodes_bound), list(edges_bound)))
            return
        rel = ast.rels[i]
        here = nodes_bound[i + 1]
        edge_ids = graph.in_edge_ids(here.id) if rel.direction == "right" else graph.out_edge_ids(here.id)
        for edge_id in edge_ids:
            edge = graph.edge(edge_id)
            if rel.type is not None and edge.type != rel.type:
                continue
            if any(e is not None and e.id == edge_id for e in edges_bound):
                continue
            other = graph.node(edge.src if rel.direction == "right" else edge.dst)
            if not compiled[i].matches(other):
                continue
            edges_bound[i] = edge
            nodes_bound[i] = other
            extend_left(i - 1)
            edges_bound[i] = None
            nodes_bound[i] = None

    for candidate in seed_candidates:
        if not compiled[seed].matches(candidate):
            continue
        nodes_bound[seed] = candidate
        extend_right(seed)
        nodes_bound[seed] = None

    matches.sort(key=_binding_key)

    rows: list[ResultRow] = []
    for bound_nodes, bound_edges in matches:
        var_map = {}
        for pattern, node in zip(ast.nodes, bound_nodes):
            if pattern.var:
                var_map[pattern.var] = node
        for pattern, edge in zip(ast.rels, bound_edges):
            if pattern.var:
                var_map[pattern.var] = edge
        row = []
        for item in ast.returns:
            entity = var_map[item.var]
            row.append(entity if item.key is None else entity.props.get(item.key))
        rows.append(row)
        if ast.limit is not None and len(rows) == ast.limit:
            break
    return rows


def _comparand_value(side: Comparand, var_map: dict, params: dict[str, PropValue]):
    if isinstance(side, Param):
        return params[side.name]
    if isinstance(side, Literal):
        return side.value
    entity = var_map[side.var]
    return entity.props.get(side.key)


def _binding_key(match: tuple[list[Node], list[Edge]]) -> tuple[int, ...]:
    nodes, edges = match
    key = []
    for i, node in enumerate(nodes):
        key.append(node.id)
        if i < len(edges):
            key.append(edges[i].id)
    return tuple(key)
