"""Tokenizer and recursive-descent parser for the query subset.

Grammar (keywords case-insensitive; labels, types and property keys
case-sensitive):

    query      := MATCH node (rel node)* [WHERE pred (AND pred)*]
                  RETURN item (, item)* [LIMIT int]
    node       := '(' [var] [':' label] [props] ')'
    props      := '{' key ':' value (',' key ':' value)* '}'
    rel        := '-[' [var] [':' type] ']->' | '<-[' [var] [':' type] ']-'
                | '-->' | '<--'
    pred       := comparand op comparand
    comparand  := var '.' key | literal | '$' name
    op         := '=' | '<>' | '<' | '>' | '<=' | '>=' | CONTAINS
    item       := var ['.' key]

At most 4 relationship hops. Literals are double-quoted strings with
backslash escapes, decimal integers/floats, and ``true``/``false``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import QuerySyntaxError, TooManyHops, UnboundVariable
from .ast import (
    Comparand,
    Literal,
    NodePattern,
    Param,
    Predicate,
    PropRef,
    QueryAst,
    RelPattern,
    ReturnItem,
    ValueExpr,
)

MAX_HOPS = 4

KEYWORDS = {"MATCH", "WHERE", "AND", "RETURN", "LIMIT", "CONTAINS", "TRUE", "FALSE"}

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_NUMBER_RE = re.compile(r"\d+(\.\d+)?([eE][+-]?\d+)?")

# longest first so "-->" never lexes as "-" + "->"
_PUNCT = [
    "-->", "<--",
    "<-", "->", "<>", "<=", ">=",
    "(", ")", "{", "}", "[", "]",
    ":", ",", ".", "=", "<", ">", "-", "$",
]

_UNESCAPES = {"\\": "\\", '"': '"', "n": "\n", "t": "\t", "r": "\r"}


@dataclass
class Token:
    type: str   # KEYWORD, IDENT, NUMBER, STRING, punctuation literal, EOF
    value: object
    pos: int    # character offset into the query text


def _byte_offset(text: str, char_pos: int) -> int:
    return len(text[:char_pos].encode("utf-8"))


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch == '"':
            j = i + 1
            chunks: list[str] = []
            while j < n and text[j] != '"':
                if text[j] == "\\":
                    if j + 1 >= n:
                        raise QuerySyntaxError(
                            "unterminated escape", _byte_offset(text, j), expected="escape character"
                        )
                    chunks.append(_UNESCAPES.get(text[j + 1], text[j + 1]))
                    j += 2
                else:
                    chunks.append(text[j])
                    j += 1
            if j >= n:
                raise QuerySyntaxError(
                    "unterminated string literal", _byte_offset(text, i), expected='"'
                )
            tokens.append(Token("STRING", "".join(chunks), i))
            i = j + 1
            continue
        if ch.isdigit():
            m = _NUMBER_RE.match(text, i)
            raw = m.group(0)
            value = int(raw) if m.group(1) is None and m.group(2) is None else float(raw)
            tokens.append(Token("NUMBER", value, i))
            i = m.end()
            continue
        m = _IDENT_RE.match(text, i)
        if m:
            word = m.group(0)
            if word.upper() in KEYWORDS:
                tokens.append(Token("KEYWORD", word.upper(), i))
            else:
                tokens.append(Token("IDENT", word, i))
            i = m.end()
            continue
        for punct in _PUNCT:
            if text.startswith(punct, i):
                tokens.append(Token(punct, punct, i))
                i += len(punct)
                break
        else:
            raise QuerySyntaxError(
                f"unexpected character {ch!r}", _byte_offset(text, i), expected="a token"
            )
    tokens.append(Token("EOF", None, n))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.i = 0

    # -- token plumbing ----------------------------------------------------

    @property
    def cur(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, expected: str) -> QuerySyntaxError:
        tok = self.cur
        shown = "end of input" if tok.type == "EOF" else repr(
            tok.value if isinstance(tok.value, str) else str(tok.value)
        )
        return QuerySyntaxError(
            f"expected {expected}, found {shown}",
            _byte_offset(self.text, tok.pos),
            expected=expected,
        )

    def expect(self, type_: str) -> Token:
        if self.cur.type != type_:
            raise self.error(f"'{type_}'" if type_ not in ("IDENT", "NUMBER", "STRING") else type_.lower())
        return self.advance()

    def keyword(self, word: str) -> Token:
        if self.cur.type != "KEYWORD" or self.cur.value != word:
            raise self.error(word)
        return self.advance()

    def at_keyword(self, word: str) -> bool:
        return self.cur.type == "KEYWORD" and self.cur.value == word

    # -- grammar -----------------------------------------------------------

    def parse(self) -> QueryAst:
        self.keyword("MATCH")
        nodes = [self.node_pattern()]
        rels: list[RelPattern] = []
        while self.cur.type in ("-", "<-", "-->", "<--"):
            if len(rels) == MAX_HOPS:
                raise TooManyHops(f"patterns are limited to {MAX_HOPS} relationship hops")
            rels.append(self.rel_pattern())
            nodes.append(self.node_pattern())
        where: list[Predicate] = []
        if self.at_keyword("WHERE"):
            self.advance()
            where.append(self.predicate())
            while self.at_keyword("AND"):
                self.advance()
                where.append(self.predicate())
        self.keyword("RETURN")
        returns = [self.return_item()]
        while self.cur.type == ",":
            self.advance()
            returns.append(self.return_item())
        limit = None
        if self.at_keyword("LIMIT"):
            self.advance()
            tok = self.expect("NUMBER")
            if not isinstance(tok.value, int) or tok.value < 1:
                raise QuerySyntaxError(
                    "LIMIT takes a positive integer",
                    _byte_offset(self.text, tok.pos),
                    expected="positive integer",
                )
            limit = tok.value
        if self.cur.type != "EOF":
            raise self.error("end of query")
        ast = QueryAst(tuple(nodes), tuple(rels), tuple(where), tuple(returns), limit)
        self._check_bindings(ast)
        return ast

    def node_pattern(self) -> NodePattern:
        self.expect("(")
        var = None
        if self.cur.type == "IDENT":
            var = self.advance().value
        label = None
        if self.cur.type == ":":
            self.advance()
            label = self.expect("IDENT").value
        props: list[tuple[str, ValueExpr]] = []
        if self.cur.type == "{":
            self.advance()
            if self.cur.type != "}":
                props.append(self.prop_entry())
                while self.cur.type == ",":
                    self.advance()
                    props.append(self.prop_entry())
            self.expect("}")
        self.expect(")")
        return NodePattern(var, label, tuple(props))

    def prop_entry(self) -> tuple[str, ValueExpr]:
        key = self.expect("IDENT").value
        self.expect(":")
        return key, self.value_expr()

    def value_expr(self) -> ValueExpr:
        if self.cur.type == "$":
            self.advance()
            return Param(self.expect("IDENT").value)
        return Literal(self.literal())

    def literal(self):
        tok = self.cur
        if tok.type == "STRING" or tok.type == "NUMBER":
            return self.advance().value
        if tok.type == "KEYWORD" and tok.value in ("TRUE", "FALSE"):
            self.advance()
            return tok.value == "TRUE"
        if tok.type == "-":  # negative number
            self.advance()
            num = self.expect("NUMBER")
            return -num.value
        raise self.error("a literal")

    def rel_pattern(self) -> RelPattern:
        if self.cur.type == "-->":
            self.advance()
            return RelPattern(None, None, "right")
        if self.cur.type == "<--":
            self.advance()
            return RelPattern(None, None, "left")
        direction = "right" if self.cur.type == "-" else "left"
        self.advance()  # '-' or '<-'
        self.expect("[")
        var = None
        if self.cur.type == "IDENT":
            var = self.advance().value
        type_ = None
        if self.cur.type == ":":
            self.advance()
            type_ = self.expect("IDENT").value
        self.expect("]")
        if direction == "right":
            self.expect("->")
        else:
            self.expect("-")
        return RelPattern(var, type_, direction)

    def predicate(self) -> Predicate:
        lhs = self.comparand()
        if self.at_keyword("CONTAINS"):
            self.advance()
            op = "CONTAINS"
        elif self.cur.type in ("=", "<>", "<", ">", "<=", ">="):
            op = self.advance().type
        else:
            raise self.error("a comparison operator")
        rhs = self.comparand()
        return Predicate(lhs, op, rhs)

    def comparand(self) -> Comparand:
        if self.cur.type == "IDENT":
            var = self.advance().value
            self.expect(".")
            key = self.expect("IDENT").value
            return PropRef(var, key)
        if self.cur.type == "$":
            self.advance()
            return Param(self.expect("IDENT").value)
        return Literal(self.literal())

    def return_item(self) -> ReturnItem:
        var = self.expect("IDENT").value
        key = None
        if self.cur.type == ".":
            self.advance()
            key = self.expect("IDENT").value
        return ReturnItem(var, key)

    def _check_bindings(self, ast: QueryAst) -> None:
        seen: set[str] = set()
        for var in [n.var for n in ast.nodes] + [r.var for r in ast.rels]:
            if var is None:
                continue
            if var in seen:
                raise QuerySyntaxError(
                    f"variable '{var}' is bound twice in the pattern", 0, expected="a fresh variable"
                )
            seen.add(var)
        for pred in ast.where:
            for side in (pred.lhs, pred.rhs):
                if isinstance(side, PropRef) and side.var not in seen:
                    raise UnboundVariable(side.var)
        for item in ast.returns:
            if item.var not in seen:
                raise UnboundVariable(item.var)


def parse(text: str) -> QueryAst:
    """Parse query text into an AST; raises QuerySyntaxError with the byte
    offset of the offending token, UnboundVariable, or TooManyHops."""
    return _Parser(text).parse()
