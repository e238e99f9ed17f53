"""Deterministic mock rule tables for offline runs and tests.

`build_identity_mock` wires a MockAdapter whose agents behave like a
competent but entirely scripted model: questions are routed by keyword to a
canonical query template, the checker approves results that plausibly match
the question, and the rewrite preserves every retrieved fact verbatim inside
a persona-dependent wrapper.  `build_ner_mock` replays a gold annotation set
as model output, exercising the extraction parser end to end.
"""

from __future__ import annotations

import json
import re
from typing import Callable, Iterable

from aipatient.adapters import AdapterParams, CallLog, MockAdapter, MockRule
from aipatient.ingest import EntitySpan, render_entity_tag, spans_by_note
from aipatient.prompting import extract_tag

# Ordered routing table: first matching keyword set wins.  Attribute routes
# (duration/intensity/frequency) come before the generic symptom route since
# their questions usually mention the symptom too.
ROUTES: tuple[tuple[str, tuple[str, ...]], ...] = (
    ("allergy", ("allerg",)),
    ("vitals", ("temperature", "heart rate", "blood pressure", "vital", "respiratory rate",
                "oxygen saturation")),
    ("family", ("family", "parents", "mother", "father", "relative", "sibling")),
    ("social", ("social", "smok", "tobacco", "alcohol", "occupation", "work", "lives", "living")),
    ("duration", ("how long", "duration", "since when")),
    ("intensity", ("intensity", "how severe", "how bad", "how intense")),
    ("frequency", ("how often", "frequen",)),
    ("medical_history", ("medical history", "medical condition", "health history", "diagnos",
                         "chronic", "in the past", "medical problem")),
    ("admission", ("admission", "admitted", "admit", "insurance", "hospital stay", "discharged")),
    ("patient", ("how old", "age", "gender", "ethnic", "religio", "marital", "married")),
    ("symptom", ("symptom", "feel", "experienc", "bother", "suffer", "complain", "fever",
                 "pain", "cough", "nausea", "hurt", "soreness")),
)

ABSTRACTIONS: dict[str, str] = {
    "symptom": "What symptoms does the patient have?",
    "duration": "What are the durations of the patient's symptoms?",
    "intensity": "How intense are the patient's symptoms?",
    "frequency": "How frequently do the patient's symptoms occur?",
    "allergy": "What allergies does the patient have?",
    "medical_history": "What medical history does the patient have?",
    "family": "What family medical history does the patient have?",
    "social": "What social history does the patient have?",
    "admission": "What are the details of the patient's admission?",
    "patient": "What are the patient's demographics?",
    "vitals": "What vital signs were recorded for the patient?",
}

SUBSETS: dict[str, dict[str, list[str]]] = {
    "symptom": {"Nodes": ["Symptom"], "Relationships": ["HAS_SYMPTOM"]},
    "duration": {"Nodes": ["Symptom", "Duration"], "Relationships": ["HAS_SYMPTOM", "HAS_DURATION"]},
    "intensity": {"Nodes": ["Symptom", "Intensity"], "Relationships": ["HAS_SYMPTOM", "HAS_INTENSITY"]},
    "frequency": {"Nodes": ["Symptom", "Frequency"], "Relationships": ["HAS_SYMPTOM", "HAS_FREQUENCY"]},
    "allergy": {"Nodes": ["Allergy"], "Relationships": ["HAS_ALLERGY"]},
    "medical_history": {"Nodes": ["History"], "Relationships": ["HAS_MEDICAL_HISTORY"]},
    "family": {"Nodes": ["FamilyMember", "FamilyMedicalHistory"],
               "Relationships": ["HAS_FAMILY_MEMBER", "HAS_MEDICAL_HISTORY"]},
    "social": {"Nodes": ["SocialHistory"], "Relationships": ["HAS_SOCIAL_HISTORY"]},
    "admission": {"Nodes": ["Admission"], "Relationships": ["HAS_ADMISSION"]},
    "patient": {"Nodes": ["Patient"], "Relationships": []},
    "vitals": {"Nodes": ["Vital"], "Relationships": ["HAS_VITAL"]},
}

_MEASUREMENTS = (
    ("temperature", "Temperature"),
    ("heart rate", "Heart Rate"),
    ("blood pressure", "Blood Pressure"),
    ("respiratory rate", "Respiratory Rate"),
    ("oxygen saturation", "Oxygen Saturation"),
)

_QUOTED_RE = re.compile(r"['\"]([^'\"]+)['\"]")


def route_question(question: str) -> str | None:
    lowered = question.lower()
    for route, keywords in ROUTES:
        if any(keyword in lowered for keyword in keywords):
            return route
    return None


def _ids_from_prompt(prompt: str) -> tuple[str, str]:
    subject = extract_tag(prompt, "subject_id") or "0"
    hadm = extract_tag(prompt, "hadm_id") or "0"
    return subject, hadm


def _quoted_entity(question: str) -> str | None:
    match = _QUOTED_RE.search(question)
    return match.group(1) if match else None


def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace("'", "\\'")


def canonical_query(route: str | None, question: str, subject_id: str, hadm_id: str) -> str:
    """The scripted query the mock emits for a routed question."""
    patient = f"(p:Patient {{SUBJECT_ID: {subject_id}}})"
    admission = f"(a:Admission {{HADM_ID: {hadm_id}}})"
    spine = f"MATCH {patient}-[:HAS_ADMISSION]->{admission}"
    lowered = question.lower()
    quoted = _quoted_entity(question)

    if route == "symptom":
        return f"{spine}-[:HAS_SYMPTOM]->(s:Symptom) RETURN s.NAME"
    if route in ("duration", "intensity", "frequency"):
        rel = {"duration": "HAS_DURATION", "intensity": "HAS_INTENSITY",
               "frequency": "HAS_FREQUENCY"}[route]
        var, label = {"duration": ("d", "Duration"), "intensity": ("i", "Intensity"),
                      "frequency": ("f", "Frequency")}[route]
        if quoted:
            symptom = f"(s:Symptom {{NAME: '{_escape(quoted)}'}})"
            return f"{spine}-[:HAS_SYMPTOM]->{symptom}-[:{rel}]->({var}:{label}) RETURN {var}.NAME"
        return (
            f"{spine}-[:HAS_SYMPTOM]->(s:Symptom)-[:{rel}]->({var}:{label}) "
            f"RETURN s.NAME, {var}.NAME"
        )
    if route == "medical_history":
        return f"MATCH {patient}-[:HAS_MEDICAL_HISTORY]->(h:History) RETURN h.NAME"
    if route == "allergy":
        return f"MATCH {patient}-[:HAS_ALLERGY]->(al:Allergy) RETURN al.NAME"
    if route == "social":
        return f"MATCH {patient}-[:HAS_SOCIAL_HISTORY]->(sh:SocialHistory) RETURN sh.NAME"
    if route == "family":
        return (
            f"MATCH {patient}-[:HAS_FAMILY_MEMBER]->(f:FamilyMember)"
            f"-[:HAS_MEDICAL_HISTORY]->(m:FamilyMedicalHistory) RETURN f.NAME, m.NAME"
        )
    if route == "admission":
        prop = "ADMISSION_TYPE"
        if "insurance" in lowered:
            prop = "INSURANCE"
        elif "how long" in lowered or "days" in lowered:
            prop = "DURATION"
        elif "discharge" in lowered:
            prop = "DISCHARGE_LOCATION"
        elif "location" in lowered or "where" in lowered:
            prop = "ADMISSION_LOCATION"
        return f"{spine} RETURN a.{prop}"
    if route == "patient":
        prop = "AGE"
        if "gender" in lowered:
            prop = "GENDER"
        elif "ethnic" in lowered:
            prop = "ETHNICITY"
        elif "religio" in lowered:
            prop = "RELIGION"
        elif "marital" in lowered or "married" in lowered:
            prop = "MARITAL_STATUS"
        return f"MATCH {patient} RETURN p.{prop}"
    if route == "vitals":
        for keyword, measurement in _MEASUREMENTS:
            if keyword in lowered:
                return (
                    f"{spine}-[:HAS_VITAL]->(v:Vital) "
                    f"WHERE v.MEASUREMENT = '{measurement}' RETURN v.NAME"
                )
        return f"{spine}-[:HAS_VITAL]->(v:Vital) RETURN v.NAME"
    # Unrouted small talk: answer from the patient record itself.
    return f"MATCH {patient} RETURN p.SUBJECT_ID"


def result_cells(prompt: str) -> tuple[list[str], list[str]]:
    """Parse (columns, flattened non-empty cells) of the query_result block."""
    raw = extract_tag(prompt, "query_result")
    if raw is None:
        return [], []
    try:
        payload = json.loads(raw)
    except json.JSONDecodeError:
        return [], []
    cells = [cell for row in payload.get("rows", []) for cell in row if cell]
    return payload.get("columns", []), cells


_DENIAL_PREFIXES = ("do you have", "have you", "are you", "did you", "is there")


def _identity_checker(prompt: str, category_vocab: dict[str, set[str]] | None) -> str:
    question = (extract_tag(prompt, "user_query") or "").strip()
    _, cells = result_cells(prompt)
    route = route_question(question)
    if not cells:
        if question.lower().startswith(_DENIAL_PREFIXES):
            # Empty result for a specific yes/no question means the record
            # denies it; approvable.
            return "Yes"
        return f"No: Please list the {route or 'relevant'} records for this patient"
    if category_vocab and route in category_vocab:
        normalized = {" ".join(cell.lower().split()) for cell in cells}
        if not normalized & category_vocab[route]:
            other = {
                name for key, vocab in category_vocab.items() if key != route for name in vocab
            }
            if normalized & other:
                return f"No: Please list the {route} records for this patient"
    return "Yes"


_PERSONA_OPENERS = {
    ("extraversion", True): "Oh, sure, happy to talk about it!",
    ("extraversion", False): "Well... if you need to know.",
    ("neuroticism", True): "I've been really worried about all this.",
    ("neuroticism", False): "It doesn't worry me much.",
    ("agreeableness", True): "Of course, thanks for asking so kindly.",
    ("agreeableness", False): "I don't see why you keep asking.",
}


def _persona_wrapper(descriptors: list[str]) -> tuple[str, str]:
    """Opening/closing phrases that vary with the personality profile."""
    if not descriptors:
        return "Here is what I can tell you:", "That is everything in my records."
    opener_bits = []
    for text in descriptors:
        opener_bits.append(text.split(",")[0].lower())
    opener = "Speaking as someone " + ", ".join(opener_bits) + ":"
    closer = "That's how it is for me."
    return opener, closer


def _identity_rewrite(
    prompt: str,
    fact_filter: Callable[[list[str], list[str]], list[str]] | None,
) -> str:
    personality_text = extract_tag(prompt, "personality") or ""
    descriptors = (
        [d.strip() for d in personality_text.strip("[]").split(",")]
        if personality_text.startswith("[")
        else []
    )
    _, cells = result_cells(prompt)
    facts = list(dict.fromkeys(cells))  # dedupe, keep order
    if fact_filter is not None:
        facts = fact_filter(descriptors, facts)
    if not facts:
        return "No, there is nothing like that in my records."
    opener, closer = _persona_wrapper(descriptors)
    return f"{opener} {'; '.join(facts)}. {closer}"


def _identity_summary(prompt: str) -> str:
    subject, hadm = _ids_from_prompt(prompt)
    question = (extract_tag(prompt, "user_query") or "").strip()
    response = (extract_tag(prompt, "patient_response") or "").strip()
    previous = (extract_tag(prompt, "conversation_history") or "").strip()
    base = f"Patient ID {subject} (Admission ID {hadm})."
    if previous and previous != "(no prior conversation)" and previous.startswith(base):
        base = previous
    return f"{base} Asked: {question} Answered: {response}"


def build_identity_mock(
    gold_spans: Iterable[EntitySpan] | None = None,
    category_vocab: dict[str, set[str]] | None = None,
    rewrite_fact_filter: Callable[[list[str], list[str]], list[str]] | None = None,
    call_log: CallLog | None = None,
) -> MockAdapter:
    """The deterministic adapter used throughout offline evaluation.

    The rewrite rule reproduces every result cell verbatim (the identity
    core); `rewrite_fact_filter` lets tests plant personality-conditional
    fact deletions, and `category_vocab` lets the checker detect results of
    the wrong category.
    """

    def _retrieval(prompt: str) -> str:
        question = (extract_tag(prompt, "user_query") or "").strip()
        route = route_question(question)
        if route is None:
            return "I cannot map this question to the schema."
        return json.dumps(SUBSETS[route])

    def _abstraction(prompt: str) -> str:
        question = (extract_tag(prompt, "user_query") or "").strip()
        route = route_question(question)
        return ABSTRACTIONS.get(route, question)

    def _kg_query(prompt: str) -> str:
        question = (extract_tag(prompt, "user_query") or "").strip()
        subject, hadm = _ids_from_prompt(prompt)
        return canonical_query(route_question(question), question, subject, hadm)

    rules = [
        MockRule("retrieval", lambda p: True, _retrieval),
        MockRule("abstraction", lambda p: True, _abstraction),
        MockRule("kg_query", lambda p: True, _kg_query),
        MockRule("checker", lambda p: True, lambda p: _identity_checker(p, category_vocab)),
        MockRule("rewrite", lambda p: True, lambda p: _identity_rewrite(p, rewrite_fact_filter)),
        MockRule("summarization", lambda p: True, _identity_summary),
    ]
    adapter = MockAdapter(rules=rules, params=AdapterParams(model="identity-mock"),
                          call_log=call_log)
    if gold_spans is not None:
        add_ner_rules(adapter, gold_spans)
    return adapter


def add_ner_rules(adapter: MockAdapter, gold_spans: Iterable[EntitySpan]) -> None:
    """Make the adapter answer NER prompts by replaying a gold annotation set."""
    grouped = spans_by_note(list(gold_spans))

    def responder(prompt: str) -> str:
        subject, hadm = _ids_from_prompt(prompt)
        spans = grouped.get((int(subject), int(hadm)), [])
        return "\n".join(render_entity_tag(span) for span in spans)

    adapter.rules.append(MockRule("ner", lambda p: True, responder))


def build_ner_mock(gold_spans: Iterable[EntitySpan], call_log: CallLog | None = None) -> MockAdapter:
    adapter = MockAdapter(params=AdapterParams(model="ner-mock"), call_log=call_log)
    add_ner_rules(adapter, gold_spans)
    return adapter
