"""Pattern-match evaluator for parsed queries over a PatientGraph.

Matching is homomorphic: distinct variables may bind the same node, shared
variables across comma-separated paths join, and each assignment of the
pattern's node slots (anonymous ones included) yields one candidate row.
Rows are ordered ascending by the bound node-id tuple, making results
deterministic for checker comparisons and tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from aipatient.kgstore import NodeLabel, PatientGraph, PropertyValue, Quantity, RelType, render_value

from .ast import (
    And,
    Comparison,
    GraphQuery,
    Literal,
    Not,
    Or,
    Predicate,
    PropertyRef,
)
from .parser import QueryError


class TypeMismatch(QueryError):
    def __init__(self, comparison: Comparison, lhs_kind: str, rhs_kind: str):
        self.comparison = comparison
        super().__init__(
            f"type mismatch in comparison {comparison.render()!r}: {lhs_kind} vs {rhs_kind}"
        )


@dataclass
class ResultTable:
    columns: list[str]
    rows: list[tuple[PropertyValue | None, ...]]

    def rendered_rows(self) -> list[list[str]]:
        return [[render_value(cell) for cell in row] for row in self.rows]

    def to_tsv(self) -> str:
        lines = ["\t".join(self.columns)]
        for row in self.rendered_rows():
            lines.append("\t".join(row))
        return "\n".join(lines)

    def is_empty(self) -> bool:
        return not self.rows


@dataclass
class _Occurrence:
    slot: int
    label: NodeLabel | None
    props: tuple[tuple[str, Literal], ...]
    prev_slot: int | None  # slot of the preceding node in the path
    rel: RelType | None  # relationship from the preceding node


def _plan(query: GraphQuery) -> tuple[list[_Occurrence], dict[str, int], int]:
    occurrences: list[_Occurrence] = []
    slot_of: dict[str, int] = {}
    next_slot = 0
    for path in query.patterns:
        prev_slot: int | None = None
        for position, node in enumerate(path.nodes):
            if node.variable is not None and node.variable in slot_of:
                slot = slot_of[node.variable]
            else:
                slot = next_slot
                next_slot += 1
                if node.variable is not None:
                    slot_of[node.variable] = slot
            rel = path.rels[position - 1].rel if position > 0 else None
            occurrences.append(
                _Occurrence(slot=slot, label=node.label, props=node.props, prev_slot=prev_slot, rel=rel)
            )
            prev_slot = slot
    return occurrences, slot_of, next_slot


def _inline_eq(actual: PropertyValue, literal: Literal) -> bool:
    if isinstance(literal, bool):
        return isinstance(actual, bool) and actual == literal
    if isinstance(literal, str):
        return isinstance(actual, str) and actual == literal
    # numeric literal
    if isinstance(actual, bool):
        return False
    if isinstance(actual, Quantity):
        return actual.value == literal
    return isinstance(actual, (int, float)) and actual == literal


def _node_satisfies(graph: PatientGraph, node_id: int, occ: _Occurrence) -> bool:
    node = graph.node(node_id)
    if occ.label is not None and node.label is not occ.label:
        return False
    for name, literal in occ.props:
        if name not in node.properties or not _inline_eq(node.properties[name], literal):
            return False
    return True


def _classify(value: PropertyValue) -> tuple[str, object]:
    if isinstance(value, bool):
        return "boolean", value
    if isinstance(value, Quantity):
        return "number", value.value
    if isinstance(value, (int, float)):
        return "number", float(value)
    return "text", value


def _eval_comparison(comp: Comparison, resolve) -> bool:
    sides = []
    for operand in (comp.lhs, comp.rhs):
        if isinstance(operand, PropertyRef):
            value = resolve(operand)
            if value is None:
                return False  # missing property: comparison is simply not satisfied
            sides.append(_classify(value))
        else:
            sides.append(_classify(operand))
    (lkind, lval), (rkind, rval) = sides
    if lkind != rkind:
        raise TypeMismatch(comp, lkind, rkind)
    if comp.op == "=":
        return lval == rval
    if comp.op == "<>":
        return lval != rval
    if lkind == "boolean":
        raise TypeMismatch(comp, lkind, rkind)
    if comp.op == "<":
        return lval < rval
    if comp.op == "<=":
        return lval <= rval
    if comp.op == ">":
        return lval > rval
    return lval >= rval


def _eval_predicate(pred: Predicate, resolve) -> bool:
    if isinstance(pred, Comparison):
        return _eval_comparison(pred, resolve)
    if isinstance(pred, Not):
        return not _eval_predicate(pred.operand, resolve)
    if isinstance(pred, And):
        return _eval_predicate(pred.left, resolve) and _eval_predicate(pred.right, resolve)
    return _eval_predicate(pred.left, resolve) or _eval_predicate(pred.right, resolve)


def execute(query: GraphQuery, graph: PatientGraph) -> ResultTable:
    """Evaluate a parsed query, returning a deterministic result table."""
    occurrences, slot_of, slot_count = _plan(query)
    bindings: list[int | None] = [None] * slot_count
    matches: list[tuple[int, ...]] = []

    def extend(index: int) -> None:
        if index == len(occurrences):
            matches.append(tuple(bindings))  # type: ignore[arg-type]
            return
        occ = occurrences[index]
        bound = bindings[occ.slot]
        if bound is not None:
            if not _node_satisfies(graph, bound, occ):
                return
            if occ.prev_slot is not None:
                prev = bindings[occ.prev_slot]
                if prev is None or not graph.has_edge(prev, occ.rel, bound):
                    return
            extend(index + 1)
            return
        if occ.prev_slot is not None:
            prev = bindings[occ.prev_slot]
            candidates = graph.out_neighbors(prev, occ.rel) if prev is not None else []
        elif occ.label is not None:
            candidates = graph.nodes_with_label(occ.label)
        else:
            candidates = graph.node_ids()
        for candidate in candidates:
            if not _node_satisfies(graph, candidate, occ):
                continue
            bindings[occ.slot] = candidate
            extend(index + 1)
            bindings[occ.slot] = None

    extend(0)
    matches.sort()

    columns = [proj.column for proj in query.projections]
    rows: list[tuple[PropertyValue | None, ...]] = []
    seen: set[tuple] = set()
    for match in matches:
        def resolve(ref: PropertyRef, match=match):
            node = graph.node(match[slot_of[ref.variable]])
            return node.properties.get(ref.prop)

        if query.where is not None and not _eval_predicate(query.where, resolve):
            continue
        row = tuple(
            graph.node(match[slot_of[proj.variable]]).properties.get(proj.prop)
            for proj in query.projections
        )
        if query.distinct:
            key = tuple(_hashable(cell) for cell in row)
            if key in seen:
                continue
            seen.add(key)
        rows.append(row)
        if query.limit is not None and len(rows) == query.limit:
            break

    return ResultTable(columns=columns, rows=rows)


def _hashable(cell: PropertyValue | None):
    if isinstance(cell, Quantity):
        return ("quantity", cell.value, cell.unit)
    return cell
