"""Query AST and the canonical renderer.

The renderer is the inverse of :func:`fountain.query.parser.parse` up to
whitespace: ``parse(render(ast)) == ast`` for any valid AST.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from ..graph import PropValue, kind_of


@dataclass(frozen=True, eq=False)
class Literal:
    value: PropValue

    # kind-aware equality: Literal(1) must not equal Literal(True)
    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Literal):
            return NotImplemented
        return kind_of(self.value) == kind_of(other.value) and self.value == other.value

    def __hash__(self) -> int:
        return hash((kind_of(self.value), self.value))


@dataclass(frozen=True)
class Param:
    name: str


ValueExpr = Union[Literal, Param]


@dataclass(frozen=True)
class PropRef:
    var: str
    key: str


Comparand = Union[PropRef, Literal, Param]


@dataclass(frozen=True)
class NodePattern:
    var: Optional[str] = None
    label: Optional[str] = None
    props: tuple[tuple[str, ValueExpr], ...] = ()


@dataclass(frozen=True)
class RelPattern:
    var: Optional[str] = None
    type: Optional[str] = None
    direction: str = "right"  # "right" = ()-[]->(), "left" = ()<-[]-()


@dataclass(frozen=True)
class Predicate:
    lhs: Comparand
    op: str  # one of = <> < > <= >= CONTAINS
    rhs: Comparand


@dataclass(frozen=True)
class ReturnItem:
    var: str
    key: Optional[str] = None


@dataclass(frozen=True)
class QueryAst:
    nodes: tuple[NodePattern, ...]
    rels: tuple[RelPattern, ...]
    where: tuple[Predicate, ...] = ()
    returns: tuple[ReturnItem, ...] = ()
    limit: Optional[int] = None

    def variables(self) -> set[str]:
        bound = {n.var for n in self.nodes if n.var}
        bound |= {r.var for r in self.rels if r.var}
        return bound

    def params(self) -> set[str]:
        names = set()
        for node in self.nodes:
            for _, value in node.props:
                if isinstance(value, Param):
                    names.add(value.name)
        for pred in self.where:
            for side in (pred.lhs, pred.rhs):
                if isinstance(side, Param):
                    names.add(side.name)
        return names


_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\t": "\\t", "\r": "\\r"}


def render_literal(value: PropValue) -> str:
    kind = kind_of(value)
    if kind == "text":
        return '"' + "".join(_ESCAPES.get(c, c) for c in value) + '"'
    if kind == "flag":
        return "true" if value else "false"
    return repr(value)  # int / float; repr round-trips exactly


def _render_value(value: ValueExpr) -> str:
    if isinstance(value, Param):
        return f"${value.name}"
    return render_literal(value.value)


def _render_node(node: NodePattern) -> str:
    parts = node.var or ""
    if node.label:
        parts += f":{node.label}"
    if node.props:
        body = ", ".join(f"{k}: {_render_value(v)}" for k, v in node.props)
        parts += (" " if parts else "") + "{" + body + "}"
    return f"({parts})"

def _render_rel(rel: RelPattern) -> str:
    if rel.var is None and rel.type is None:
        return "-->" if rel.direction == "right" else "<--"
    inner = rel.var or ""
    if rel.type:
        inner += f":{rel.type}"
    return f"-[{inner}]->" if rel.direction == "right" else f"<-[{inner}]-"


def _render_comparand(side: Comparand) -> str:
    if isinstance(side, PropRef):
        return f"{side.var}.{side.key}"
    return _render_value(side)


def render(ast: QueryAst) -> str:
    out = "MATCH " + _render_node(ast.nodes[0])
    for rel, node in zip(ast.rels, ast.nodes[1:]):
        out += _render_rel(rel) + _render_node(node)
    if ast.where:
        out += " WHERE " + " AND ".join(
            f"{_render_comparand(p.lhs)} {p.op} {_render_comparand(p.rhs)}" for p in ast.where
        )
    out += " RETURN " + ", ".join(
        f"{r.var}.{r.key}" if r.key else r.var for r in ast.returns
    )
    if ast.limit is not None:
        out += f" LIMIT {ast.limit}"
    return out
