"""Cypher-subset query language: parse, render, execute."""

from .ast import (
    Literal,
    NodePattern,
    Param,
    Predicate,
    PropRef,
    QueryAst,
    RelPattern,
    ReturnItem,
    render,
)
from .executor import execute
from .parser import parse

__all__ = [
    "Literal",
    "NodePattern",
    "Param",
    "Predicate",
    "PropRef",
    "QueryAst",
    "RelPattern",
    "ReturnItem",
    "execute",
    "parse",
    "render",
]
