"""In-memory property graph holding the patient knowledge base.

Nodes are typed by a closed set of labels (Patient, Admission, clinical
entities), edges by a closed set of relationship types, and every edge must
conform to the schema adjacency table (`ADJACENCY`).  The graph is built
single-threaded during ingestion and treated as immutable afterwards, so it
can be shared freely across concurrent reader sessions.

Persistence is a line-delimited text format: a header line followed by one
JSON object per node or edge, which keeps graph files diff-able and
streamable and makes round trips bit-exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Union


class NodeLabel(str, Enum):
    """The twelve node labels the knowledge base may contain."""

    PATIENT = "Patient"
    ADMISSION = "Admission"
    SYMPTOM = "Symptom"
    DURATION = "Duration"
    INTENSITY = "Intensity"
    FREQUENCY = "Frequency"
    HISTORY = "History"
    VITAL = "Vital"
    ALLERGY = "Allergy"
    SOCIAL_HISTORY = "SocialHistory"
    FAMILY_MEMBER = "FamilyMember"
    FAMILY_MEDICAL_HISTORY = "FamilyMedicalHistory"


class RelType(str, Enum):
    """The eleven relationship types the knowledge base may contain."""

    HAS_ADMISSION = "HAS_ADMISSION"
    HAS_SYMPTOM = "HAS_SYMPTOM"
    HAS_NOSYMPTOM = "HAS_NOSYMPTOM"
    HAS_DURATION = "HAS_DURATION"
    HAS_FREQUENCY = "HAS_FREQUENCY"
    HAS_INTENSITY = "HAS_INTENSITY"
    HAS_MEDICAL_HISTORY = "HAS_MEDICAL_HISTORY"
    HAS_VITAL = "HAS_VITAL"
    HAS_ALLERGY = "HAS_ALLERGY"
    HAS_SOCIAL_HISTORY = "HAS_SOCIAL_HISTORY"
    HAS_FAMILY_MEMBER = "HAS_FAMILY_MEMBER"


#: Units a Quantity property may carry.
KNOWN_UNITS = frozenset({"F", "C", "BPM", "mmHg", "breaths/min", "%", "days", "mg/dL"})


@dataclass(frozen=True)
class Quantity:
    """A numeric property value tagged with a measurement unit."""

    value: float
    unit: str

    def render(self) -> str:
        return f"{format_number(self.value)} {self.unit}"


PropertyValue = Union[str, int, float, bool, Quantity]


def format_number(x: float) -> str:
    """Render a number the way it appears in clinical notes (no trailing .0 noise)."""
    if isinstance(x, int):
        return str(x)
    if float(x).is_integer():
        return str(int(x))
    return repr(x)


def render_value(value: PropertyValue | None) -> str:
    """Canonical text form of a property value, used in result tables and prompts."""
    if value is None:
        return ""
    if isinstance(value, Quantity):
        return value.render()
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return format_number(value)
    return value


def normalize_name(text: str) -> str:
    """Lowercased, whitespace-collapsed form used for entity-node reuse."""
    return " ".join(text.lower().split())


# Required properties per label.  Entity labels additionally require NAME.
PATIENT_PROPS = ("SUBJECT_ID", "GENDER", "AGE", "ETHNICITY", "RELIGION", "MARITAL_STATUS")
ADMISSION_PROPS = (
    "HADM_ID",
    "ADMISSION_TYPE",
    "ADMISSION_LOCATION",
    "DISCHARGE_LOCATION",
    "INSURANCE",
    "DURATION",
)

ENTITY_LABELS = frozenset(NodeLabel) - {NodeLabel.PATIENT, NodeLabel.ADMISSION}

REQUIRED_PROPERTIES: dict[NodeLabel, tuple[str, ...]] = {
    NodeLabel.PATIENT: PATIENT_PROPS,
    NodeLabel.ADMISSION: ADMISSION_PROPS,
    **{label: ("NAME",) for label in ENTITY_LABELS},
}

#: Normative (source label, relationship, target label) adjacency table.
ADJACENCY = frozenset(
    {
        (NodeLabel.PATIENT, RelType.HAS_ADMISSION, NodeLabel.ADMISSION),
        (NodeLabel.ADMISSION, RelType.HAS_SYMPTOM, NodeLabel.SYMPTOM),
        (NodeLabel.ADMISSION, RelType.HAS_NOSYMPTOM, NodeLabel.SYMPTOM),
        (NodeLabel.SYMPTOM, RelType.HAS_DURATION, NodeLabel.DURATION),
        (NodeLabel.SYMPTOM, RelType.HAS_INTENSITY, NodeLabel.INTENSITY),
        (NodeLabel.SYMPTOM, RelType.HAS_FREQUENCY, NodeLabel.FREQUENCY),
        (NodeLabel.PATIENT, RelType.HAS_MEDICAL_HISTORY, NodeLabel.HISTORY),
        (NodeLabel.ADMISSION, RelType.HAS_VITAL, NodeLabel.VITAL),
        (NodeLabel.PATIENT, RelType.HAS_ALLERGY, NodeLabel.ALLERGY),
        (NodeLabel.PATIENT, RelType.HAS_SOCIAL_HISTORY, NodeLabel.SOCIAL_HISTORY),
        (NodeLabel.PATIENT, RelType.HAS_FAMILY_MEMBER, NodeLabel.FAMILY_MEMBER),
        (NodeLabel.FAMILY_MEMBER, RelType.HAS_MEDICAL_HISTORY, NodeLabel.FAMILY_MEDICAL_HISTORY),
    }
)

GRAPH_FILE_HEADER = "AIPATIENT-KG v1"


class GraphError(Exception):
    """Base class for knowledge-graph errors."""


class MissingRequiredProperty(GraphError):
    def __init__(self, label: NodeLabel, property_name: str):
        self.label = label
        self.property_name = property_name
        super().__init__(f"{label.value} node requires property {property_name}")


class InvalidPropertyValue(GraphError):
    pass


class DuplicateIdentity(GraphError):
    pass


class UnknownNode(GraphError):
    pass


class SchemaViolation(GraphError):
    pass


class DuplicateEdge(GraphError):
    pass


class IoFailure(GraphError):
    pass


class MalformedGraphFile(GraphError):
    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"line {line}: {message}")


@dataclass
class GraphNode:
    id: int
    label: NodeLabel
    properties: dict[str, PropertyValue]


@dataclass(frozen=True)
class GraphEdge:
    source: int
    rel: RelType
    target: int


@dataclass
class GraphStats:
    node_counts: dict[NodeLabel, int]
    edge_counts: dict[RelType, int]

    @property
    def total_nodes(self) -> int:
        return sum(self.node_counts.values())

    @property
    def total_edges(self) -> int:
        return sum(self.edge_counts.values())


def _check_property_value(name: str, value: PropertyValue) -> None:
    if isinstance(value, bool) or isinstance(value, str):
        return
    if isinstance(value, Quantity):
        if not math.isfinite(value.value):
            raise InvalidPropertyValue(f"property {name}: quantity value must be finite")
        if value.unit not in KNOWN_UNITS:
            raise InvalidPropertyValue(
                f"property {name}: unknown unit {value.unit!r} (known: {sorted(KNOWN_UNITS)})"
            )
        return
    if isinstance(value, (int, float)):
        if not math.isfinite(value):
            raise InvalidPropertyValue(f"property {name}: number must be finite")
        return
    raise InvalidPropertyValue(f"property {name}: unsupported type {type(value).__name__}")


class PatientGraph:
    """Id-indexed node collection plus edges, with label and identity indexes.

    Single-writer during construction; safe for many concurrent readers once
    built.  Node ids are opaque, stable integers assigned in insertion order.
    """

    def __init__(self) -> None:
        self._nodes: dict[int, GraphNode] = {}
        self._edge_keys: set[tuple[int, RelType, int]] = set()
        self._edges: list[GraphEdge] = []
        self._by_label: dict[NodeLabel, list[int]] = {label: [] for label in NodeLabel}
        self._patient_by_subject: dict[int, int] = {}
        self._admission_by_hadm: dict[int, int] = {}
        self._entity_by_name: dict[tuple[NodeLabel, str], int] = {}
        self._out: dict[tuple[int, RelType], list[int]] = {}
        self._next_id = 1

    # -- construction -----------------------------------------------------

    def add_node(self, label: NodeLabel, properties: dict[str, PropertyValue]) -> int:
        label = NodeLabel(label)
        for required in REQUIRED_PROPERTIES[label]:
            if required not in properties:
                raise MissingRequiredProperty(label, required)
        for name, value in properties.items():
            _check_property_value(name, value)

        if label is NodeLabel.PATIENT:
            subject_id = properties["SUBJECT_ID"]
            if subject_id in self._patient_by_subject:
                raise DuplicateIdentity(f"Patient with SUBJECT_ID {subject_id} already exists")
        if label is NodeLabel.ADMISSION:
            hadm_id = properties["HADM_ID"]
            if hadm_id in self._admission_by_hadm:
                raise DuplicateIdentity(f"Admission with HADM_ID {hadm_id} already exists")

        node_id = self._next_id
        self._next_id += 1
        self._insert(GraphNode(node_id, label, dict(properties)))
        return node_id

    def _insert(self, node: GraphNode) -> None:
        self._nodes[node.id] = node
        self._by_label[node.label].append(node.id)
        if node.label is NodeLabel.PATIENT:
            self._patient_by_subject[node.properties["SUBJECT_ID"]] = node.id
        elif node.label is NodeLabel.ADMISSION:
            self._admission_by_hadm[node.properties["HADM_ID"]] = node.id
        else:
            key = (node.label, normalize_name(str(node.properties["NAME"])))
            self._entity_by_name.setdefault(key, node.id)

    def add_edge(self, source: int, rel: RelType, target: int) -> None:
        rel = RelType(rel)
        if source not in self._nodes:
            raise UnknownNode(f"no node with id {source}")
        if target not in self._nodes:
            raise UnknownNode(f"no node with id {target}")
        src_label = self._nodes[source].label
        dst_label = self._nodes[target].label
        if (src_label, rel, dst_label) not in ADJACENCY:
            raise SchemaViolation(
                f"{src_label.value}-[{rel.value}]->{dst_label.value} is not in the schema"
            )
        key = (source, rel, target)
        if key in self._edge_keys:
            raise DuplicateEdge(f"edge {source}-[{rel.value}]->{target} already present")
        self._edge_keys.add(key)
        self._edges.append(GraphEdge(source, rel, target))
        self._out.setdefault((source, rel), []).append(target)

    def merge_entity(self, label: NodeLabel, name: str, extra: dict[str, PropertyValue] | None = None) -> int:
        """Return the node for this entity name, creating it on first sight.

        Names identical after normalization resolve to one shared node; the
        verbatim surface form of the first sighting is kept.
        """
        if label not in ENTITY_LABELS:
            raise SchemaViolation(f"{label.value} is not an entity label")
        existing = self._entity_by_name.get((label, normalize_name(name)))
        if existing is not None:
            return existing
        properties: dict[str, PropertyValue] = {"NAME": name}
        if extra:
            properties.update(extra)
        return self.add_node(label, properties)

    # -- lookups ----------------------------------------------------------

    def node(self, node_id: int) -> GraphNode:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise UnknownNode(f"no node with id {node_id}") from None

    def has_node(self, node_id: int) -> bool:
        return node_id in self._nodes

    def has_edge(self, source: int, rel: RelType, target: int) -> bool:
        return (source, rel, target) in self._edge_keys

    def node_ids(self) -> list[int]:
        return sorted(self._nodes)

    def nodes_with_label(self, label: NodeLabel) -> list[int]:
        return sorted(self._by_label[label])

    def edges(self) -> list[GraphEdge]:
        return list(self._edges)

    def out_neighbors(self, source: int, rel: RelType) -> list[int]:
        return sorted(self._out.get((source, rel), []))

    def find_patient(self, subject_id: int) -> int | None:
        return self._patient_by_subject.get(subject_id)

    def find_admission(self, hadm_id: int) -> int | None:
        return self._admission_by_hadm.get(hadm_id)

    def find_entity(self, label: NodeLabel, name: str) -> int | None:
        return self._entity_by_name.get((label, normalize_name(name)))

    def __len__(self) -> int:
        return len(self._nodes)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PatientGraph):
            return NotImplemented
        mine = {(n.id, n.label, tuple(sorted(n.properties.items(), key=lambda kv: kv[0]))) for n in self._nodes.values()}
        theirs = {(n.id, n.label, tuple(sorted(n.properties.items(), key=lambda kv: kv[0]))) for n in other._nodes.values()}
        return mine == theirs and self._edge_keys == other._edge_keys

    # -- statistics and validation ----------------------------------------

    def stats(self) -> GraphStats:
        node_counts = {label: len(ids) for label, ids in self._by_label.items()}
        edge_counts = {rel: 0 for rel in RelType}
        for edge in self._edges:
            edge_counts[edge.rel] += 1
        return GraphStats(node_counts, edge_counts)

    def validate(self) -> None:
        """Exhaustive invariant pass; raises on the first violation found."""
        for edge in self._edges:
            src = self._nodes.get(edge.source)
            dst = self._nodes.get(edge.target)
            if src is None or dst is None:
                raise UnknownNode(f"edge {edge} references a missing node")
            if (src.label, edge.rel, dst.label) not in ADJACENCY:
                raise SchemaViolation(f"edge {edge} violates the adjacency table")
        owners: dict[int, int] = {}
        for edge in self._edges:
            if edge.rel is RelType.HAS_ADMISSION:
                owners[edge.target] = owners.get(edge.target, 0) + 1
        for admission_id in self._by_label[NodeLabel.ADMISSION]:
            if owners.get(admission_id, 0) != 1:
                raise SchemaViolation(
                    f"Admission node {admission_id} must be the target of exactly one "
                    f"HAS_ADMISSION edge, found {owners.get(admission_id, 0)}"
                )

    # -- persistence --------------------------------------------------------

    def save(self, destination: str | Path) -> None:
        try:
            with open(destination, "w", encoding="utf-8") as fh:
                fh.write(GRAPH_FILE_HEADER + "\n")
                for node_id in sorted(self._nodes):
                    node = self._nodes[node_id]
                    record = {
                        "kind": "node",
                        "id": node.id,
                        "label": node.label.value,
                        "props": {k: _encode_value(v) for k, v in node.properties.items()},
                    }
                    fh.write(json.dumps(record, sort_keys=True) + "\n")
                for edge in self._edges:
                    record = {
                        "kind": "edge",
                        "src": edge.source,
                        "dst": edge.target,
                        "rel": edge.rel.value,
                    }
                    fh.write(json.dumps(record, sort_keys=True) + "\n")
        except OSError as exc:
            raise IoFailure(f"cannot write graph file {destination}: {exc}") from exc

    @classmethod
    def load(cls, source: str | Path) -> "PatientGraph":
        try:
            with open(source, "r", encoding="utf-8") as fh:
                lines = fh.read().splitlines()
        except OSError as exc:
            raise IoFailure(f"cannot read graph file {source}: {exc}") from exc

        if not lines or lines[0] != GRAPH_FILE_HEADER:
            raise MalformedGraphFile(f"expected header {GRAPH_FILE_HEADER!r}", line=1)

        graph = cls()
        pending_edges: list[tuple[int, dict]] = []
        for line_no, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedGraphFile(f"invalid JSON ({exc.msg})", line=line_no) from exc
            kind = record.get("kind")
            if kind == "node":
                graph._load_node(record, line_no)
            elif kind == "edge":
                pending_edges.append((line_no, record))
            else:
                raise MalformedGraphFile(f"unknown record kind {kind!r}", line=line_no)
        for line_no, record in pending_edges:
            graph._load_edge(record, line_no)
        return graph

    def _load_node(self, record: dict, line_no: int) -> None:
        try:
            node_id = record["id"]
            label = NodeLabel(record["label"])
            props = {k: _decode_value(v) for k, v in record["props"].items()}
        except (KeyError, ValueError) as exc:
            raise MalformedGraphFile(f"bad node record: {exc}", line=line_no) from exc
        if not isinstance(node_id, int):
            raise MalformedGraphFile("node id must be an integer", line=line_no)
        if node_id in self._nodes:
            raise MalformedGraphFile(f"duplicate node id {node_id}", line=line_no)
        for required in REQUIRED_PROPERTIES[label]:
            if required not in props:
                raise MalformedGraphFile(
                    f"{label.value} node {node_id} missing property {required}", line=line_no
                )
        self._insert(GraphNode(node_id, label, props))
        self._next_id = max(self._next_id, node_id + 1)

    def _load_edge(self, record: dict, line_no: int) -> None:
        try:
            src, dst, rel = record["src"], record["dst"], RelType(record["rel"])
        except (KeyError, ValueError) as exc:
            raise MalformedGraphFile(f"bad edge record: {exc}", line=line_no) from exc
        try:
            self.add_edge(src, rel, dst)
        except GraphError as exc:
            raise MalformedGraphFile(str(exc), line=line_no) from exc


def _encode_value(value: PropertyValue):
    if isinstance(value, Quantity):
        return {"num": value.value, "unit": value.unit}
    return value


def _decode_value(value) -> PropertyValue:
    if isinstance(value, dict):
        if set(value) != {"num", "unit"}:
            raise ValueError(f"unrecognized property encoding {value!r}")
        return Quantity(float(value["num"]), str(value["unit"]))
    if isinstance(value, (str, int, float, bool)):
        return value
    raise ValueError(f"unsupported property type {type(value).__name__}")


def schema_text() -> str:
    """Human- and model-readable description of the full graph schema."""
    lines = ["Node labels and their properties:"]
    for label in NodeLabel:
        props = ", ".join(REQUIRED_PROPERTIES[label])
        lines.append(f"  {label.value} node has properties: {props}")
    lines.append("Relationships (source -> target: type):")
    for src, rel, dst in sorted(ADJACENCY, key=lambda t: (t[0].value, t[1].value, t[2].value)):
        lines.append(f"  {src.value} -> {dst.value}: {rel.value}")
    return "\n".join(lines)
