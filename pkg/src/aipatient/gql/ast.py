"""AST for the read-only graph query subset, plus the canonical renderer.

The subset covers MATCH with one or more comma-separated left-to-right paths,
inline property equalities, WHERE with comparisons combined by AND/OR/NOT,
and RETURN with property projections, DISTINCT and LIMIT.  `render` emits
text that reparses to an equal AST (parentheses are inserted wherever the
tree shape would otherwise be lost).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from aipatient.kgstore import NodeLabel, RelType

Literal = Union[str, int, float, bool]


@dataclass(frozen=True)
class PropertyRef:
    variable: str
    prop: str

    def render(self) -> str:
        return f"{self.variable}.{self.prop}"


@dataclass(frozen=True)
class Comparison:
    lhs: "PropertyRef | Literal"
    op: str  # one of = <> < <= > >=
    rhs: "PropertyRef | Literal"

    def render(self) -> str:
        return f"{_operand(self.lhs)} {self.op} {_operand(self.rhs)}"


@dataclass(frozen=True)
class And:
    left: "Predicate"
    right: "Predicate"


@dataclass(frozen=True)
class Or:
    left: "Predicate"
    right: "Predicate"


@dataclass(frozen=True)
class Not:
    operand: "Predicate"


Predicate = Union[Comparison, And, Or, Not]


@dataclass(frozen=True)
class NodePattern:
    variable: str | None
    label: NodeLabel | None
    props: tuple[tuple[str, Literal], ...] = ()

    def render(self) -> str:
        parts = self.variable or ""
        if self.label is not None:
            parts += f":{self.label.value}"
        if self.props:
            inner = ", ".join(f"{name}: {render_literal(value)}" for name, value in self.props)
            parts += (" " if parts else "") + "{" + inner + "}"
        return f"({parts})"


@dataclass(frozen=True)
class RelPattern:
    rel: RelType

    def render(self) -> str:
        return f"-[:{self.rel.value}]->"


@dataclass(frozen=True)
class PatternPath:
    """Alternating node and relationship patterns; len(nodes) == len(rels) + 1."""

    nodes: tuple[NodePattern, ...]
    rels: tuple[RelPattern, ...] = ()

    def render(self) -> str:
        out = [self.nodes[0].render()]
        for rel, node in zip(self.rels, self.nodes[1:]):
            out.append(rel.render())
            out.append(node.render())
        return "".join(out)


@dataclass(frozen=True)
class Projection:
    variable: str
    prop: str

    @property
    def column(self) -> str:
        return f"{self.variable}.{self.prop}"

    def render(self) -> str:
        return self.column


@dataclass(frozen=True)
class GraphQuery:
    patterns: tuple[PatternPath, ...]
    projections: tuple[Projection, ...]
    where: Predicate | None = None
    distinct: bool = False
    limit: int | None = None


def render_literal(value: Literal) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace("'", "\\'")
        return f"'{escaped}'"
    if isinstance(value, int):
        return str(value)
    return repr(value)


def _operand(operand: PropertyRef | Literal) -> str:
    if isinstance(operand, PropertyRef):
        return operand.render()
    return render_literal(operand)


# Precedence levels for predicate rendering: OR < AND < NOT < comparison.
_PRECEDENCE = {Or: 1, And: 2, Not: 3, Comparison: 4}


def _render_predicate(pred: Predicate, parent_level: int, right_child: bool) -> str:
    level = _PRECEDENCE[type(pred)]
    if isinstance(pred, Comparison):
        text = pred.render()
    elif isinstance(pred, Not):
        text = "NOT " + _render_predicate(pred.operand, level, right_child=False)
    elif isinstance(pred, And):
        text = (
            _render_predicate(pred.left, level, right_child=False)
            + " AND "
            + _render_predicate(pred.right, level, right_child=True)
        )
    else:
        text = (
            _render_predicate(pred.left, level, right_child=False)
            + " OR "
            + _render_predicate(pred.right, level, right_child=True)
        )
    # Parenthesize when the child binds looser than the parent, or when a
    # same-precedence subtree sits in the right slot of a left-associative
    # operator (otherwise reparsing would rebalance it to the left).
    if level < parent_level or (level == parent_level and right_child and level in (1, 2)):
        return f"({text})"
    return text


def render(query: GraphQuery) -> str:
    """Canonical text for a query; parse(render(q)) == q."""
    parts = ["MATCH ", ", ".join(path.render() for path in query.patterns)]
    if query.where is not None:
        parts.append(" WHERE ")
        parts.append(_render_predicate(query.where, 0, right_child=False))
    parts.append(" RETURN ")
    if query.distinct:
        parts.append("DISTINCT ")
    parts.append(", ".join(proj.render() for proj in query.projections))
    if query.limit is not None:
        parts.append(f" LIMIT {query.limit}")
    return "".join(parts)
