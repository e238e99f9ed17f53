"""Tokenizer and recursive-descent parser for the graph query subset.

Keywords are case-insensitive, identifiers case-sensitive.  Errors carry the
byte offset into the query text and the set of tokens that would have been
acceptable at that point.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from aipatient.kgstore import NodeLabel, RelType

from .ast import (
    And,
    Comparison,
    GraphQuery,
    Literal,
    NodePattern,
    Not,
    Or,
    PatternPath,
    Predicate,
    Projection,
    PropertyRef,
    RelPattern,
)


class QueryError(Exception):
    """Base class for query parsing errors."""


class QuerySyntaxError(QueryError):
    def __init__(self, text: str, position: int, expected: set[str], found: str):
        self.byte_offset = len(text[:position].encode("utf-8"))
        self.expected = frozenset(expected)
        self.found = found
        expected_list = ", ".join(sorted(expected))
        super().__init__(
            f"syntax error at byte {self.byte_offset}: found {found}, expected one of: {expected_list}"
        )


class UnknownLabel(QueryError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown node label {name!r}")


class UnknownRelType(QueryError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown relationship type {name!r}")


class UnboundVariable(QueryError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"variable {name!r} is not bound by any pattern")


KEYWORDS = {"MATCH", "WHERE", "RETURN", "DISTINCT", "LIMIT", "AND", "OR", "NOT", "TRUE", "FALSE"}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>\d+(\.\d+)?([eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>'(?:\\.|[^'\\])*'|"(?:\\.|[^"\\])*")
  | (?P<arrow>->)
  | (?P<op><=|>=|<>|<|>|=)
  | (?P<punct>[(){}\[\]:,.\-])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT, NUMBER, STRING, ARROW, OP, one-char punct, EOF
    text: str
    position: int

    @property
    def keyword(self) -> str | None:
        if self.kind == "IDENT" and self.text.upper() in KEYWORDS:
            return self.text.upper()
        return None


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise QuerySyntaxError(text, pos, {"a token"}, repr(text[pos]))
        if match.lastgroup != "ws":
            kind = {
                "number": "NUMBER",
                "ident": "IDENT",
                "string": "STRING",
                "arrow": "ARROW",
                "op": "OP",
            }.get(match.lastgroup, match.group())
            tokens.append(Token(kind, match.group(), pos))
        pos = match.end()
    tokens.append(Token("EOF", "<end of query>", pos))
    return tokens


def _unescape(raw: str) -> str:
    body = raw[1:-1]
    out: list[str] = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "\\" and i + 1 < len(body):
            nxt = body[i + 1]
            out.append({"n": "\n", "t": "\t"}.get(nxt, nxt))
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.index = 0

    # -- token helpers ------------------------------------------------------

    @property
    def current(self) -> Token:
        return self.tokens[self.index]

    def _fail(self, expected: set[str]) -> "QuerySyntaxError":
        token = self.current
        raise QuerySyntaxError(self.text, token.position, expected, token.text)

    def advance(self) -> Token:
        token = self.current
        self.index += 1
        return token

    def at_keyword(self, word: str) -> bool:
        return self.current.keyword == word

    def take_keyword(self, word: str) -> None:
        if not self.at_keyword(word):
            self._fail({word})
        self.advance()

    def take(self, kind: str) -> Token:
        if self.current.kind != kind:
            self._fail({kind})
        return self.advance()

    def take_ident(self, expected_desc: str) -> Token:
        if self.current.kind != "IDENT" or self.current.keyword is not None:
            self._fail({expected_desc})
        return self.advance()

    # -- grammar ------------------------------------------------------------

    def parse_query(self) -> GraphQuery:
        self.take_keyword("MATCH")
        patterns = [self.parse_path()]
        while self.current.kind == ",":
            self.advance()
            patterns.append(self.parse_path())

        where = None
        if self.at_keyword("WHERE"):
            self.advance()
            where = self.parse_or()

        self.take_keyword("RETURN")
        distinct = False
        if self.at_keyword("DISTINCT"):
            self.advance()
            distinct = True
        projections = [self.parse_projection()]
        while self.current.kind == ",":
            self.advance()
            projections.append(self.parse_projection())

        limit = None
        if self.at_keyword("LIMIT"):
            self.advance()
            token = self.take("NUMBER")
            if "." in token.text or "e" in token.text or "E" in token.text or int(token.text) < 1:
                raise QuerySyntaxError(self.text, token.position, {"a positive integer"}, token.text)
            limit = int(token.text)

        if self.current.kind != "EOF":
            self._fail({"end of query"})

        query = GraphQuery(
            patterns=tuple(patterns),
            projections=tuple(projections),
            where=where,
            distinct=distinct,
            limit=limit,
        )
        _check_bindings(query)
        return query

    def parse_path(self) -> PatternPath:
        nodes = [self.parse_node_pattern()]
        rels: list[RelPattern] = []
        while self.current.kind == "-":
            rels.append(self.parse_rel_pattern())
            nodes.append(self.parse_node_pattern())
        return PatternPath(nodes=tuple(nodes), rels=tuple(rels))

    def parse_node_pattern(self) -> NodePattern:
        self.take("(")
        variable = None
        label = None
        props: tuple[tuple[str, Literal], ...] = ()
        if self.current.kind == "IDENT" and self.current.keyword is None:
            variable = self.advance().text
        if self.current.kind == ":":
            self.advance()
            token = self.take_ident("a node label")
            try:
                label = NodeLabel(token.text)
            except ValueError:
                raise UnknownLabel(token.text) from None
        if self.current.kind == "{":
            props = self.parse_props()
        self.take(")")
        return NodePattern(variable=variable, label=label, props=props)

    def parse_props(self) -> tuple[tuple[str, Literal], ...]:
        self.take("{")
        pairs = [self.parse_prop_pair()]
        while self.current.kind == ",":
            self.advance()
            pairs.append(self.parse_prop_pair())
        self.take("}")
        return tuple(pairs)

    def parse_prop_pair(self) -> tuple[str, Literal]:
        name = self.take_ident("a property name").text
        self.take(":")
        return name, self.parse_literal()

    def parse_rel_pattern(self) -> RelPattern:
        self.take("-")
        self.take("[")
        self.take(":")
        token = self.take_ident("a relationship type")
        try:
            rel = RelType(token.text)
        except ValueError:
            raise UnknownRelType(token.text) from None
        self.take("]")
        self.take("ARROW")
        return RelPattern(rel=rel)

    def parse_or(self) -> Predicate:
        left = self.parse_and()
        while self.at_keyword("OR"):
            self.advance()
            left = Or(left, self.parse_and())
        return left

    def parse_and(self) -> Predicate:
        left = self.parse_unary()
        while self.at_keyword("AND"):
            self.advance()
            left = And(left, self.parse_unary())
        return left

    def parse_unary(self) -> Predicate:
        if self.at_keyword("NOT"):
            self.advance()
            return Not(self.parse_unary())
        if self.current.kind == "(":
            self.advance()
            inner = self.parse_or()
            self.take(")")
            return inner
        return self.parse_comparison()

    def parse_comparison(self) -> Comparison:
        lhs = self.parse_operand()
        if self.current.kind != "OP":
            self._fail({"=", "<>", "<", "<=", ">", ">="})
        op = self.advance().text
        rhs = self.parse_operand()
        return Comparison(lhs=lhs, op=op, rhs=rhs)

    def parse_operand(self) -> PropertyRef | Literal:
        if self.current.kind == "IDENT" and self.current.keyword is None:
            variable = self.advance().text
            self.take(".")
            prop = self.take_ident("a property name").text
            return PropertyRef(variable, prop)
        return self.parse_literal()

    def parse_literal(self) -> Literal:
        token = self.current
        if token.kind == "STRING":
            self.advance()
            return _unescape(token.text)
        if token.kind == "NUMBER":
            self.advance()
            return _number(token.text)
        if token.kind == "-":
            self.advance()
            number = self.take("NUMBER")
            value = _number(number.text)
            return -value
        if token.keyword == "TRUE":
            self.advance()
            return True
        if token.keyword == "FALSE":
            self.advance()
            return False
        self._fail({"a string", "a number", "TRUE", "FALSE"})

    def parse_projection(self) -> Projection:
        variable = self.take_ident("a variable").text
        self.take(".")
        prop = self.take_ident("a property name").text
        return Projection(variable, prop)


def _number(text: str) -> int | float:
    if "." in text or "e" in text or "E" in text:
        return float(text)
    return int(text)


def _pattern_variables(query: GraphQuery) -> set[str]:
    bound: set[str] = set()
    for path in query.patterns:
        for node in path.nodes:
            if node.variable is not None:
                bound.add(node.variable)
    return bound


def _predicate_refs(pred: Predicate) -> list[PropertyRef]:
    if isinstance(pred, Comparison):
        return [op for op in (pred.lhs, pred.rhs) if isinstance(op, PropertyRef)]
    if isinstance(pred, Not):
        return _predicate_refs(pred.operand)
    return _predicate_refs(pred.left) + _predicate_refs(pred.right)


def _check_bindings(query: GraphQuery) -> None:
    bound = _pattern_variables(query)
    for projection in query.projections:
        if projection.variable not in bound:
            raise UnboundVariable(projection.variable)
    if query.where is not None:
        for ref in _predicate_refs(query.where):
            if ref.variable not in bound:
                raise UnboundVariable(ref.variable)


def parse(text: str) -> GraphQuery:
    """Parse query text into an AST, validating labels, rels, and bindings."""
    return _Parser(text).parse_query()
