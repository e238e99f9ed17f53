"""Graph query language: parser, renderer, and evaluator for the read-only subset."""

from .ast import (
    And,
    Comparison,
    GraphQuery,
    NodePattern,
    Not,
    Or,
    PatternPath,
    Predicate,
    Projection,
    PropertyRef,
    RelPattern,
    render,
    render_literal,
)
from .executor import ResultTable, TypeMismatch, execute
from .parser import (
    QueryError,
    QuerySyntaxError,
    UnboundVariable,
    UnknownLabel,
    UnknownRelType,
    parse,
)

__all__ = [
    "And",
    "Comparison",
    "GraphQuery",
    "NodePattern",
    "Not",
    "Or",
    "PatternPath",
    "Predicate",
    "Projection",
    "PropertyRef",
    "QueryError",
    "QuerySyntaxError",
    "RelPattern",
    "ResultTable",
    "TypeMismatch",
    "UnboundVariable",
    "UnknownLabel",
    "UnknownRelType",
    "execute",
    "parse",
    "render",
    "render_literal",
]
