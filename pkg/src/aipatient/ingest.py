"""Discharge-note ingestion: model-driven entity extraction, graph building,
and span-level scoring of extractions against gold annotations.

Extraction asks the language-model adapter for XML-style entity tags with
explicit character offsets.  Output that cannot be parsed is re-prompted
(twice); output that parses but does not ground to the note text is dropped
and logged, never repaired or fabricated.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

from aipatient.adapters import LMAdapter, reprompt_suffix
from aipatient.kgstore import NodeLabel, PatientGraph, Quantity, RelType
from aipatient.prompting import load_template

logger = logging.getLogger(__name__)

SECTION_NAMES = (
    "chief_complaint",
    "history_of_present_illness",
    "vital_signs",
    "allergies",
    "social_history",
    "family_history",
)


class IngestError(Exception):
    pass


class UnparseableModelOutput(IngestError):
    pass


class NoteMismatch(IngestError):
    pass


class EntityCategory(str, Enum):
    SYMPTOM = "Symptom"
    DENIED_SYMPTOM = "DeniedSymptom"
    DURATION = "Duration"
    INTENSITY = "Intensity"
    FREQUENCY = "Frequency"
    MEDICAL_HISTORY = "MedicalHistory"
    VITAL = "Vital"
    ALLERGY = "Allergy"
    SOCIAL_HISTORY = "SocialHistory"
    FAMILY_MEMBER = "FamilyMember"
    FAMILY_MEDICAL_HISTORY = "FamilyMedicalHistory"


#: Node label each extracted category lands on (denied symptoms share Symptom).
CATEGORY_LABEL: dict[EntityCategory, NodeLabel] = {
    EntityCategory.SYMPTOM: NodeLabel.SYMPTOM,
    EntityCategory.DENIED_SYMPTOM: NodeLabel.SYMPTOM,
    EntityCategory.DURATION: NodeLabel.DURATION,
    EntityCategory.INTENSITY: NodeLabel.INTENSITY,
    EntityCategory.FREQUENCY: NodeLabel.FREQUENCY,
    EntityCategory.MEDICAL_HISTORY: NodeLabel.HISTORY,
    EntityCategory.VITAL: NodeLabel.VITAL,
    EntityCategory.ALLERGY: NodeLabel.ALLERGY,
    EntityCategory.SOCIAL_HISTORY: NodeLabel.SOCIAL_HISTORY,
    EntityCategory.FAMILY_MEMBER: NodeLabel.FAMILY_MEMBER,
    EntityCategory.FAMILY_MEDICAL_HISTORY: NodeLabel.FAMILY_MEDICAL_HISTORY,
}

_SYMPTOM_ATTRIBUTE_REL: dict[EntityCategory, RelType] = {
    EntityCategory.DURATION: RelType.HAS_DURATION,
    EntityCategory.INTENSITY: RelType.HAS_INTENSITY,
    EntityCategory.FREQUENCY: RelType.HAS_FREQUENCY,
}


@dataclass
class DischargeNote:
    subject_id: int
    hadm_id: int
    gender: str
    age: int
    ethnicity: str
    religion: str
    marital_status: str
    admission_type: str
    admission_location: str
    discharge_location: str
    insurance: str
    duration_days: int
    sections: dict[str, str]

    def __post_init__(self) -> None:
        for name in self.sections:
            if name not in SECTION_NAMES:
                raise IngestError(f"unknown note section {name!r}")
        for name in SECTION_NAMES:
            self.sections.setdefault(name, "")
        if not any(self.sections.values()):
            raise IngestError(
                f"note {self.subject_id}/{self.hadm_id} has no non-empty section"
            )

    @property
    def key(self) -> tuple[int, int]:
        return (self.subject_id, self.hadm_id)

    @classmethod
    def from_json(cls, payload: dict) -> "DischargeNote":
        return cls(
            subject_id=int(payload["subject_id"]),
            hadm_id=int(payload["hadm_id"]),
            gender=payload["gender"],
            age=int(payload["age"]),
            ethnicity=payload["ethnicity"],
            religion=payload["religion"],
            marital_status=payload["marital_status"],
            admission_type=payload["admission_type"],
            admission_location=payload["admission_location"],
            discharge_location=payload["discharge_location"],
            insurance=payload["insurance"],
            duration_days=int(payload["duration_days"]),
            sections=dict(payload["sections"]),
        )

    def to_json(self) -> dict:
        return {
            "subject_id": self.subject_id,
            "hadm_id": self.hadm_id,
            "gender": self.gender,
            "age": self.age,
            "ethnicity": self.ethnicity,
            "religion": self.religion,
            "marital_status": self.marital_status,
            "admission_type": self.admission_type,
            "admission_location": self.admission_location,
            "discharge_location": self.discharge_location,
            "insurance": self.insurance,
            "duration_days": self.duration_days,
            "sections": dict(self.sections),
        }


@dataclass(frozen=True)
class EntitySpan:
    subject_id: int
    hadm_id: int
    category: EntityCategory
    section: str
    start: int
    end: int
    text: str
    parent: tuple[str, int, int] | None = None  # (section, start, end) of the anchor span

    @property
    def key(self) -> tuple[str, int, int]:
        return (self.section, self.start, self.end)

    @classmethod
    def from_json(cls, payload: dict) -> "EntitySpan":
        parent = payload.get("parent")
        return cls(
            subject_id=int(payload["subject_id"]),
            hadm_id=int(payload["hadm_id"]),
            category=EntityCategory(payload["category"]),
            section=payload["section"],
            start=int(payload["start"]),
            end=int(payload["end"]),
            text=payload["text"],
            parent=(parent["section"], int(parent["start"]), int(parent["end"])) if parent else None,
        )

    def to_json(self) -> dict:
        payload = {
            "subject_id": self.subject_id,
            "hadm_id": self.hadm_id,
            "category": self.category.value,
            "section": self.section,
            "start": self.start,
            "end": self.end,
            "text": self.text,
        }
        if self.parent is not None:
            payload["parent"] = {
                "section": self.parent[0],
                "start": self.parent[1],
                "end": self.parent[2],
            }
        return payload


@dataclass
class ExtractionResult:
    subject_id: int
    hadm_id: int
    spans: list[EntitySpan]
    transcript: list[str] = field(default_factory=list)  # raw model output, for audit

    @property
    def key(self) -> tuple[int, int]:
        return (self.subject_id, self.hadm_id)


@dataclass
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn
        )


@dataclass
class ScoreBreakdown:
    per_category: dict[EntityCategory, ConfusionCounts]
    pooled: ConfusionCounts


# ---------------------------------------------------------------------------
# Entity extraction
# ---------------------------------------------------------------------------

_ENTITY_TAG_RE = re.compile(r"<entity\b[^>]*>.*?</entity>", re.DOTALL)
_ATTR_RE = re.compile(r'(\w+)="([^"]*)"')
_EXTRACTION_RETRIES = 2


def render_note_sections(note: DischargeNote) -> str:
    parts = []
    for name in SECTION_NAMES:
        parts.append(f"<section name=\"{name}\">\n{note.sections[name]}\n</section>")
    return "\n".join(parts)


def render_entity_tag(span: EntitySpan) -> str:
    attrs = (
        f'category="{span.category.value}" section="{span.section}" '
        f'start="{span.start}" end="{span.end}"'
    )
    if span.parent is not None:
        attrs += (
            f' parent_section="{span.parent[0]}" parent_start="{span.parent[1]}"'
            f' parent_end="{span.parent[2]}"'
        )
    return f"<entity {attrs}>{span.text}</entity>"


def _parse_entity_tags(completion: str, note: DischargeNote) -> list[EntitySpan]:
    spans: list[EntitySpan] = []
    for tag_match in _ENTITY_TAG_RE.finditer(completion):
        tag = tag_match.group()
        header_end = tag.index(">")
        attrs = dict(_ATTR_RE.findall(tag[: header_end + 1]))
        text = tag[header_end + 1 : -len("</entity>")]
        try:
            category = EntityCategory(attrs["category"])
            section = attrs["section"]
            start = int(attrs["start"])
            end = int(attrs["end"])
        except (KeyError, ValueError) as exc:
            raise UnparseableModelOutput(f"bad entity tag {tag!r}: {exc}") from exc
        if section not in SECTION_NAMES:
            raise UnparseableModelOutput(f"bad entity tag {tag!r}: unknown section")
        parent = None
        if "parent_start" in attrs:
            try:
                parent = (
                    attrs.get("parent_section", section),
                    int(attrs["parent_start"]),
                    int(attrs["parent_end"]),
                )
            except (KeyError, ValueError) as exc:
                raise UnparseableModelOutput(f"bad parent reference in {tag!r}") from exc
        spans.append(
            EntitySpan(
                subject_id=note.subject_id,
                hadm_id=note.hadm_id,
                category=category,
                section=section,
                start=start,
                end=end,
                text=text,
                parent=parent,
            )
        )
    return spans


def _ground_spans(spans: list[EntitySpan], note: DischargeNote) -> list[EntitySpan]:
    grounded = []
    for span in spans:
        source = note.sections[span.section]
        if not (0 <= span.start < span.end <= len(source)):
            logger.warning(
                "dropping ungrounded span %s/%s %s [%d,%d): offsets out of range",
                span.subject_id, span.hadm_id, span.section, span.start, span.end,
            )
            continue
        if source[span.start : span.end] != span.text:
            logger.warning(
                "dropping ungrounded span %s/%s %s [%d,%d): text %r does not match source",
                span.subject_id, span.hadm_id, span.section, span.start, span.end, span.text,
            )
            continue
        grounded.append(span)
    section_order = {name: i for i, name in enumerate(SECTION_NAMES)}
    grounded.sort(key=lambda s: (section_order[s.section], s.start, s.end, s.category.value))
    return grounded


def extract_entities(note: DischargeNote, adapter: LMAdapter) -> ExtractionResult:
    """Run model NER over one note, returning grounded entity spans."""
    template = load_template("ner")
    base_prompt = template.substitute(
        subject_id=str(note.subject_id),
        hadm_id=str(note.hadm_id),
        note_sections=render_note_sections(note),
        categories=", ".join(c.value for c in EntityCategory),
    )
    transcript: list[str] = []
    prompt = base_prompt
    last_error: UnparseableModelOutput | None = None
    for attempt in range(1 + _EXTRACTION_RETRIES):
        if attempt > 0:
            prompt = base_prompt + reprompt_suffix(attempt, str(last_error))
        completion = adapter.complete(prompt, role="ner")
        transcript.append(completion)
        try:
            spans = _parse_entity_tags(completion, note)
        except UnparseableModelOutput as exc:
            last_error = exc
            continue
        return ExtractionResult(
            subject_id=note.subject_id,
            hadm_id=note.hadm_id,
            spans=_ground_spans(spans, note),
            transcript=transcript,
        )
    raise UnparseableModelOutput(
        f"note {note.subject_id}/{note.hadm_id}: model output unparseable "
        f"after {_EXTRACTION_RETRIES} re-prompts: {last_error}"
    )


# ---------------------------------------------------------------------------
# Graph construction
# ---------------------------------------------------------------------------


def _parse_vital(text: str) -> dict:
    """Split a vital reading like 'Temperature: 97.8 F' into measurement/value."""
    extra: dict = {}
    if ":" in text:
        measurement, _, reading = text.partition(":")
        extra["MEASUREMENT"] = measurement.strip()
        match = re.match(r"\s*(-?\d+(?:\.\d+)?)\s*(\S+)?\s*$", reading)
        if match:
            value = float(match.group(1))
            unit = match.group(2)
            try:
                extra["VALUE"] = Quantity(value, unit) if unit else value
            except Exception:
                extra["VALUE"] = value
    return extra


def build_graph(extractions: list[ExtractionResult], notes: list[DischargeNote]) -> PatientGraph:
    """Fold extractions and note demographics into a fresh knowledge graph."""
    seen_keys = set()
    for extraction in extractions:
        if extraction.key in seen_keys:
            raise IngestError(f"duplicate extraction for note {extraction.key}")
        seen_keys.add(extraction.key)
    by_key = {extraction.key: extraction for extraction in extractions}

    graph = PatientGraph()
    patient_ids: dict[int, int] = {}
    for note in sorted(notes, key=lambda n: n.key):
        try:
            _ingest_note(graph, note, by_key.get(note.key), patient_ids)
        except Exception as exc:
            raise IngestError(f"note {note.subject_id}/{note.hadm_id}: {exc}") from exc
    return graph


def _ingest_note(
    graph: PatientGraph,
    note: DischargeNote,
    extraction: ExtractionResult | None,
    patient_ids: dict[int, int],
) -> None:
    if note.subject_id in patient_ids:
        patient_id = patient_ids[note.subject_id]
    else:
        patient_id = graph.add_node(
            NodeLabel.PATIENT,
            {
                "SUBJECT_ID": note.subject_id,
                "GENDER": note.gender,
                "AGE": note.age,
                "ETHNICITY": note.ethnicity,
                "RELIGION": note.religion,
                "MARITAL_STATUS": note.marital_status,
            },
        )
        patient_ids[note.subject_id] = patient_id
    admission_id = graph.add_node(
        NodeLabel.ADMISSION,
        {
            "HADM_ID": note.hadm_id,
            "ADMISSION_TYPE": note.admission_type,
            "ADMISSION_LOCATION": note.admission_location,
            "DISCHARGE_LOCATION": note.discharge_location,
            "INSURANCE": note.insurance,
            "DURATION": note.duration_days,
        },
    )
    graph.add_edge(patient_id, RelType.HAS_ADMISSION, admission_id)
    if extraction is None:
        return

    spans = extraction.spans
    node_of_span: dict[tuple[str, int, int], int] = {}

    def add_edge_once(src: int, rel: RelType, dst: int) -> None:
        if not graph.has_edge(src, rel, dst):
            graph.add_edge(src, rel, dst)

    # First pass: anchor entities (symptoms, family members, patient-level facts).
    for span in spans:
        category = span.category
        if category in (EntityCategory.SYMPTOM, EntityCategory.DENIED_SYMPTOM):
            node = graph.merge_entity(NodeLabel.SYMPTOM, span.text)
            rel = RelType.HAS_SYMPTOM if category is EntityCategory.SYMPTOM else RelType.HAS_NOSYMPTOM
            add_edge_once(admission_id, rel, node)
        elif category is EntityCategory.MEDICAL_HISTORY:
            node = graph.merge_entity(NodeLabel.HISTORY, span.text)
            add_edge_once(patient_id, RelType.HAS_MEDICAL_HISTORY, node)
        elif category is EntityCategory.VITAL:
            node = graph.merge_entity(NodeLabel.VITAL, span.text, extra=_parse_vital(span.text))
            add_edge_once(admission_id, RelType.HAS_VITAL, node)
        elif category is EntityCategory.ALLERGY:
            node = graph.merge_entity(NodeLabel.ALLERGY, span.text)
            add_edge_once(patient_id, RelType.HAS_ALLERGY, node)
        elif category is EntityCategory.SOCIAL_HISTORY:
            node = graph.merge_entity(NodeLabel.SOCIAL_HISTORY, span.text)
            add_edge_once(patient_id, RelType.HAS_SOCIAL_HISTORY, node)
        elif category is EntityCategory.FAMILY_MEMBER:
            node = graph.merge_entity(NodeLabel.FAMILY_MEMBER, span.text)
            add_edge_once(patient_id, RelType.HAS_FAMILY_MEMBER, node)
        else:
            continue
        node_of_span[span.key] = node

    def resolve_parent(span: EntitySpan, wanted: tuple[EntityCategory, ...]) -> int | None:
        if span.parent is not None:
            return node_of_span.get(span.parent)
        # Fall back to the nearest preceding span of the wanted category in-section.
        best = None
        for other in spans:
            if other.category in wanted and other.section == span.section and other.start <= span.start:
                if best is None or other.start > best.start:
                    best = other
        return node_of_span.get(best.key) if best is not None else None

    # Second pass: attribute entities hanging off an anchor span.
    for span in spans:
        category = span.category
        if category in _SYMPTOM_ATTRIBUTE_REL:
            anchor = resolve_parent(span, (EntityCategory.SYMPTOM, EntityCategory.DENIED_SYMPTOM))
            if anchor is None:
                logger.warning("span %r has no symptom to attach to; skipped", span.text)
                continue
            node = graph.merge_entity(CATEGORY_LABEL[category], span.text)
            add_edge_once(anchor, _SYMPTOM_ATTRIBUTE_REL[category], node)
        elif category is EntityCategory.FAMILY_MEDICAL_HISTORY:
            anchor = resolve_parent(span, (EntityCategory.FAMILY_MEMBER,))
            if anchor is None:
                logger.warning("span %r has no family member to attach to; skipped", span.text)
                continue
            node = graph.merge_entity(NodeLabel.FAMILY_MEDICAL_HISTORY, span.text)
            add_edge_once(anchor, RelType.HAS_MEDICAL_HISTORY, node)


# ---------------------------------------------------------------------------
# Span-level scoring
# ---------------------------------------------------------------------------


def score_ner(predicted: list[EntitySpan], gold: list[EntitySpan]) -> ScoreBreakdown:
    """Exact-boundary span matching: a prediction is a true positive iff an
    unmatched gold span shares its (section, category, start, end).

    True negatives are counted as one per (section, category) slot where both
    sides are empty, which makes the FPR denominator well-defined.
    """
    keys = {(s.subject_id, s.hadm_id) for s in predicted} | {(s.subject_id, s.hadm_id) for s in gold}
    if len(keys) > 1:
        raise NoteMismatch(f"spans reference different notes: {sorted(keys)}")

    per_category: dict[EntityCategory, ConfusionCounts] = {
        category: ConfusionCounts() for category in EntityCategory
    }
    for category in EntityCategory:
        pred_keys = [s.key for s in predicted if s.category is category]
        gold_keys = [s.key for s in gold if s.category is category]
        gold_pool = list(gold_keys)
        tp = 0
        for key in pred_keys:
            if key in gold_pool:
                gold_pool.remove(key)
                tp += 1
        counts = per_category[category]
        counts.tp = tp
        counts.fp = len(pred_keys) - tp
        counts.fn = len(gold_keys) - tp
        occupied_pred = {s.section for s in predicted if s.category is category}
        occupied_gold = {s.section for s in gold if s.category is category}
        counts.tn = sum(
            1 for section in SECTION_NAMES
            if section not in occupied_pred and section not in occupied_gold
        )

    pooled = ConfusionCounts()
    for counts in per_category.values():
        pooled = pooled + counts
    return ScoreBreakdown(per_category=per_category, pooled=pooled)


def sum_breakdowns(breakdowns: list[ScoreBreakdown]) -> ScoreBreakdown:
    total = ScoreBreakdown(
        per_category={category: ConfusionCounts() for category in EntityCategory},
        pooled=ConfusionCounts(),
    )
    for item in breakdowns:
        for category, counts in item.per_category.items():
            total.per_category[category] = total.per_category[category] + counts
        total.pooled = total.pooled + item.pooled
    return total


# ---------------------------------------------------------------------------
# Fixture IO
# ---------------------------------------------------------------------------


def load_note(path: str | Path) -> DischargeNote:
    with open(path, "r", encoding="utf-8") as fh:
        return DischargeNote.from_json(json.load(fh))


def load_notes(directory: str | Path) -> list[DischargeNote]:
    notes = [load_note(p) for p in sorted(Path(directory).glob("*.json"))]
    if not notes:
        raise IngestError(f"no note files found under {directory}")
    return notes


def load_spans(path: str | Path) -> list[EntitySpan]:
    spans = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                spans.append(EntitySpan.from_json(json.loads(line)))
    return spans


def save_spans(spans: list[EntitySpan], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for span in spans:
            fh.write(json.dumps(span.to_json(), sort_keys=True) + "\n")


def spans_by_note(spans: list[EntitySpan]) -> dict[tuple[int, int], list[EntitySpan]]:
    grouped: dict[tuple[int, int], list[EntitySpan]] = {}
    for span in spans:
        grouped.setdefault((span.subject_id, span.hadm_id), []).append(span)
    return grouped
