"""Regenerate the synthetic fixture corpus: 20 discharge notes, their gold
entity annotations, the interview QA set, and the prebuilt graph file.

Run from the repo root:

    python tools/gen_fixtures.py

Notes are assembled from structured patient descriptions, with gold span
offsets recorded while each section string is built, so span text always
equals the source slice exactly.  The QA expected facts come straight from
the patient descriptions (not from the graph code), keeping them independent
of the pipeline they are used to test.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from aipatient.ingest import (  # noqa: E402
    DischargeNote,
    EntityCategory,
    EntitySpan,
    build_graph,
    extract_entities,
    save_spans,
)
from aipatient.mocks import build_ner_mock, route_question  # noqa: E402

FIXTURES = REPO / "fixtures"


# ---------------------------------------------------------------------------
# Patient descriptions
# ---------------------------------------------------------------------------


@dataclass
class Sym:
    name: str
    denied: bool = False
    duration: str | None = None
    intensity: str | None = None
    frequency: str | None = None


@dataclass
class Spec:
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
    symptoms: list[Sym]
    vitals: list[tuple[str, float, str]]
    allergies: list[str]
    history: list[str]
    social: list[str]
    family: list[tuple[str, list[str]]]


COHORT: list[Spec] = [
    # The worked interview patient: GI bleed presentation, SSRI allergy.
    Spec(23709, 182203, "M", 67, "White", "Christian", "Married", "Emergency", "Transfer",
         "Home", "Medicare", 6,
         symptoms=[Sym("black and bloody stools", duration="three days"),
                   Sym("lightheadedness", frequency="every morning"),
                   Sym("shortness of breath"), Sym("fever", denied=True)],
         vitals=[("Temperature", 98.2, "F"), ("Heart Rate", 96.0, "BPM"),
                 ("Blood Pressure", 88.0, "mmHg")],
         allergies=["SSRI medications"],
         history=["depression", "coronary artery disease", "prior stroke", "gastritis",
                  "previous falls with fractures"],
         social=["occupation: retired", "lives with wife", "tobacco: quit 17 years ago"],
         family=[("father", ["colon cancer"])]),
    # The complete-set retrieval patient.
    Spec(22265, 147802, "F", 58, "Black/African American", "Christian", "Single", "Emergency",
         "Referral", "Home", "Private", 4,
         symptoms=[Sym("chest pain", duration="two weeks", intensity="severe"),
                   Sym("nausea", frequency="after meals"), Sym("dizziness"),
                   Sym("vomiting", denied=True)],
         vitals=[("Temperature", 98.9, "F"), ("Heart Rate", 88.0, "BPM")],
         allergies=["penicillin"],
         history=["hypertension", "migraine"],
         social=["occupation: teacher", "never smoked"],
         family=[("mother", ["breast cancer"]), ("brother", ["hypertension"])]),
    # The cardiac-workup patient whose records mirror the worked note example.
    Spec(24312, 190234, "M", 73, "White", "Christian", "Married", "Emergency", "Referral",
         "Home", "Medicare", 5,
         symptoms=[Sym("chest pain", duration="one week"),
                   Sym("soreness in the chest", duration="two weeks"),
                   Sym("palpitations", denied=True)],
         vitals=[("Temperature", 97.8, "F"), ("Heart Rate", 80.0, "BPM"),
                 ("Blood Pressure", 70.0, "mmHg")],
         allergies=["Vasotec"],
         history=["hypertension", "hyperlipidemia", "diabetes mellitus"],
         social=["occupation: retired", "lives with wife", "tobacco: quit 17 years ago"],
         family=[("both parents", ["CVA"])]),
    Spec(20011, 150011, "F", 44, "Hispanic/Latino", "Other/Unspecified", "Married", "Urgent",
         "Transfer", "Home", "Medicaid", 3,
         symptoms=[Sym("abdominal pain", intensity="moderate", frequency="after meals"),
                   Sym("diarrhea"), Sym("fever", denied=True)],
         vitals=[("Temperature", 99.1, "F"), ("Heart Rate", 92.0, "BPM")],
         allergies=["sulfa drugs"],
         history=["gastroesophageal reflux", "irritable bowel syndrome"],
         social=["occupation: cashier", "denies alcohol use"],
         family=[("mother", ["diabetes mellitus"])]),
    Spec(20012, 150012, "M", 81, "White", "Non-Christian Religions", "Other/Unspecified",
         "Emergency", "Home", "Hospice", "Medicare", 9,
         symptoms=[Sym("confusion", frequency="intermittently"), Sym("fatigue"),
                   Sym("headache", denied=True)],
         vitals=[("Temperature", 97.2, "F"), ("Heart Rate", 61.0, "BPM"),
                 ("Oxygen Saturation", 93.0, "%")],
         allergies=[],
         history=["atrial fibrillation", "chronic kidney disease", "anemia"],
         social=["lives alone", "former heavy alcohol use, quit 5 years ago"],
         family=[]),
    Spec(20013, 150013, "F", 29, "Asian", "Other/Unspecified", "Single", "Emergency",
         "Referral", "Home", "Private", 2,
         symptoms=[Sym("cough", duration="five days", frequency="twice a day"),
                   Sym("sore throat"), Sym("shortness of breath", denied=True)],
         vitals=[("Temperature", 100.4, "F"), ("Heart Rate", 104.0, "BPM"),
                 ("Respiratory Rate", 22.0, "breaths/min")],
         allergies=["latex"],
         history=["asthma"],
         social=["occupation: software engineer", "never smoked", "drinks socially"],
         family=[("grandmother", ["coronary artery disease"])]),
    Spec(20014, 150014, "M", 52, "White", "Christian", "Married", "Emergency", "Transfer",
         "Other", "Private", 7,
         symptoms=[Sym("back pain", duration="several months", intensity="sharp"),
                   Sym("leg numbness", frequency="every morning"), Sym("weakness", denied=True)],
         vitals=[("Temperature", 98.0, "F"), ("Heart Rate", 77.0, "BPM")],
         allergies=["aspirin"],
         history=["degenerative disc disease", "obesity"],
         social=["occupation: construction worker", "smokes one pack per day"],
         family=[("father", ["hypertension", "CVA"])]),
    Spec(20015, 150015, "F", 71, "Black/African American", "Christian", "Other/Unspecified",
         "Emergency", "Home", "Transfer", "Medicare", 8,
         symptoms=[Sym("swelling in the legs", duration="one month"),
                   Sym("shortness of breath", intensity="mild"), Sym("chest pain", denied=True)],
         vitals=[("Temperature", 97.5, "F"), ("Heart Rate", 85.0, "BPM"),
                 ("Blood Pressure", 95.0, "mmHg")],
         allergies=[],
         history=["congestive heart failure", "hypertension", "diabetes mellitus"],
         social=["lives with daughter", "never smoked"],
         family=[("sister", ["diabetes mellitus"])]),
    Spec(20016, 150016, "M", 38, "Other", "Other/Unspecified", "Single", "Urgent", "Referral",
         "Home", "Self Pay", 1,
         symptoms=[Sym("headache", intensity="severe", frequency="every morning"),
                   Sym("blurred vision"), Sym("nausea", denied=True)],
         vitals=[("Temperature", 98.3, "F"), ("Heart Rate", 70.0, "BPM")],
         allergies=["shellfish"],
         history=["migraine"],
         social=["occupation: graphic designer", "drinks socially"],
         family=[("mother", ["migraine"])]),
    Spec(20017, 150017, "F", 63, "White", "Christian", "Married", "Emergency", "Transfer",
         "Home", "Medicare", 5,
         symptoms=[Sym("joint pain", duration="one year"), Sym("morning stiffness",
                   frequency="every morning"), Sym("rash", denied=True)],
         vitals=[("Temperature", 97.9, "F"), ("Heart Rate", 72.0, "BPM")],
         allergies=["codeine"],
         history=["rheumatoid arthritis", "osteoporosis"],
         social=["occupation: librarian", "never smoked"],
         family=[("mother", ["rheumatoid arthritis"])]),
    Spec(20018, 150018, "M", 47, "Hispanic/Latino", "Christian", "Married", "Emergency",
         "Home", "Home", "Private", 3,
         symptoms=[Sym("palpitations", frequency="intermittently"), Sym("anxiety"),
                   Sym("syncope", denied=True)],
         vitals=[("Temperature", 98.6, "F"), ("Heart Rate", 118.0, "BPM")],
         allergies=[],
         history=["hyperthyroidism"],
         social=["occupation: chef", "drinks socially", "tobacco: quit 2 years ago"],
         family=[("father", ["coronary artery disease"])]),
    Spec(20019, 150019, "F", 85, "White", "Christian", "Other/Unspecified", "Emergency",
         "Transfer", "Transfer", "Medicare", 11,
         symptoms=[Sym("hip pain", intensity="severe"), Sym("inability to walk"),
                   Sym("head injury", denied=True)],
         vitals=[("Temperature", 97.1, "F"), ("Heart Rate", 90.0, "BPM")],
         allergies=["morphine"],
         history=["osteoporosis", "previous falls with fractures", "dementia"],
         social=["lives alone"],
         family=[]),
    Spec(20020, 150020, "M", 55, "Asian", "Non-Christian Religions", "Married", "Emergency",
         "Referral", "Home", "Private", 4,
         symptoms=[Sym("epigastric pain", duration="three days", frequency="after meals"),
                   Sym("heartburn"), Sym("weight loss", denied=True)],
         vitals=[("Temperature", 98.1, "F"), ("Heart Rate", 79.0, "BPM")],
         allergies=[],
         history=["peptic ulcer disease", "gastroesophageal reflux"],
         social=["occupation: accountant", "drinks socially"],
         family=[("brother", ["stomach cancer"])]),
    Spec(20021, 150021, "F", 33, "Black/African American", "Christian", "Single", "Urgent",
         "Home", "Home", "Medicaid", 2,
         symptoms=[Sym("wheezing", frequency="twice a day"), Sym("chest tightness",
                   intensity="moderate"), Sym("fever", denied=True)],
         vitals=[("Temperature", 98.4, "F"), ("Heart Rate", 99.0, "BPM"),
                 ("Oxygen Saturation", 94.0, "%")],
         allergies=["dust mites"],
         history=["asthma", "eczema"],
         social=["occupation: nurse", "never smoked"],
         family=[("mother", ["asthma"])]),
    Spec(20022, 150022, "M", 76, "White", "Christian", "Married", "Emergency", "Transfer",
         "Home", "Medicare", 6,
         symptoms=[Sym("difficulty urinating", duration="two months"), Sym("fatigue"),
                   Sym("back pain", denied=True)],
         vitals=[("Temperature", 97.7, "F"), ("Heart Rate", 68.0, "BPM")],
         allergies=["iodinated contrast"],
         history=["benign prostatic hyperplasia", "hypertension"],
         social=["occupation: retired", "lives with wife"],
         family=[("father", ["prostate cancer"])]),
    Spec(20023, 150023, "F", 49, "White", "Other/Unspecified", "Married", "Emergency",
         "Referral", "Home", "Private", 3,
         symptoms=[Sym("fatigue", duration="several months"), Sym("weight gain"),
                   Sym("palpitations", denied=True)],
         vitals=[("Temperature", 96.9, "F"), ("Heart Rate", 55.0, "BPM")],
         allergies=[],
         history=["hypothyroidism", "depression"],
         social=["occupation: manager", "never smoked", "drinks socially"],
         family=[("sister", ["thyroid disease"])]),
    Spec(20024, 150024, "M", 61, "Other", "Christian", "Other/Unspecified", "Emergency",
         "Home", "Other", "Government", 10,
         symptoms=[Sym("slurred speech"), Sym("right arm weakness", intensity="severe"),
                   Sym("vision loss", denied=True)],
         vitals=[("Temperature", 98.0, "F"), ("Heart Rate", 83.0, "BPM"),
                 ("Blood Pressure", 112.0, "mmHg")],
         allergies=["heparin"],
         history=["hypertension", "atrial fibrillation", "prior stroke"],
         social=["tobacco: quit 10 years ago", "lives with wife"],
         family=[("both parents", ["CVA"])]),
    Spec(20025, 150025, "F", 27, "Hispanic/Latino", "Christian", "Single", "Emergency",
         "Referral", "Home", "Medicaid", 2,
         symptoms=[Sym("flank pain", intensity="sharp", frequency="intermittently"),
                   Sym("burning with urination"), Sym("fever", denied=True)],
         vitals=[("Temperature", 99.8, "F"), ("Heart Rate", 95.0, "BPM")],
         allergies=["nitrofurantoin"],
         history=["recurrent urinary tract infections"],
         social=["occupation: student", "never smoked"],
         family=[]),
    Spec(20026, 150026, "M", 69, "White", "Non-Christian Religions", "Married", "Emergency",
         "Transfer", "Home", "Medicare", 7,
         symptoms=[Sym("productive cough", duration="one week", frequency="twice a day"),
                   Sym("chills"), Sym("hemoptysis", denied=True)],
         vitals=[("Temperature", 101.2, "F"), ("Heart Rate", 101.0, "BPM"),
                 ("Respiratory Rate", 24.0, "breaths/min")],
         allergies=["azithromycin"],
         history=["chronic obstructive pulmonary disease", "hyperlipidemia"],
         social=["tobacco: one pack per day for 40 years", "occupation: retired"],
         family=[("brother", ["lung cancer"])]),
    Spec(20027, 150027, "F", 75, "White", "Christian", "Other/Unspecified", "Emergency",
         "Home", "Home", "Medicare", 4,
         symptoms=[Sym("dizziness", frequency="every morning"), Sym("unsteady gait",
                   duration="two weeks"), Sym("hearing loss", denied=True)],
         vitals=[("Temperature", 97.6, "F"), ("Heart Rate", 64.0, "BPM")],
         allergies=["meclizine"],
         history=["hypertension", "osteoarthritis"],
         social=["lives alone", "never smoked"],
         family=[("mother", ["osteoporosis"])]),
]


# ---------------------------------------------------------------------------
# Section assembly with exact offsets
# ---------------------------------------------------------------------------


@dataclass
class SectionBuilder:
    name: str
    text: str = ""
    spans: list[dict] = field(default_factory=list)

    def add(self, text: str) -> tuple[int, int]:
        start = len(self.text)
        self.text += text
        return start, len(self.text)

    def entity(self, text: str, category: EntityCategory,
               parent: tuple[int, int] | None = None) -> tuple[int, int]:
        start, end = self.add(text)
        self.spans.append(
            {"category": category, "start": start, "end": end, "text": text, "parent": parent}
        )
        return start, end


def build_note(spec: Spec) -> tuple[DischargeNote, list[EntitySpan]]:
    sections: dict[str, str] = {}
    spans: list[EntitySpan] = []

    def finish(builder: SectionBuilder) -> None:
        sections[builder.name] = builder.text
        for record in builder.spans:
            parent = record["parent"]
            spans.append(
                EntitySpan(
                    subject_id=spec.subject_id,
                    hadm_id=spec.hadm_id,
                    category=record["category"],
                    section=builder.name,
                    start=record["start"],
                    end=record["end"],
                    text=record["text"],
                    parent=(builder.name, parent[0], parent[1]) if parent else None,
                )
            )

    cc = SectionBuilder("chief_complaint")
    primary = spec.symptoms[0]
    cc.entity(primary.name, EntityCategory.SYMPTOM)
    finish(cc)

    hpi = SectionBuilder("history_of_present_illness")
    pronoun = "He" if spec.gender == "M" else "She"
    hpi.add(f"{spec.age} year old {'male' if spec.gender == 'M' else 'female'} presenting "
            f"with {primary.name}. ")
    for sym in spec.symptoms:
        if sym.denied:
            hpi.add(f"{pronoun} denies ")
            hpi.entity(sym.name, EntityCategory.DENIED_SYMPTOM)
            hpi.add(". ")
            continue
        hpi.add("The patient reports ")
        anchor = hpi.entity(sym.name, EntityCategory.SYMPTOM)
        if sym.duration:
            hpi.add(" for ")
            hpi.entity(sym.duration, EntityCategory.DURATION, parent=anchor)
        if sym.frequency:
            hpi.add(" occurring ")
            hpi.entity(sym.frequency, EntityCategory.FREQUENCY, parent=anchor)
        if sym.intensity:
            hpi.add(", ")
            hpi.entity(sym.intensity, EntityCategory.INTENSITY, parent=anchor)
            hpi.add(" in intensity")
        hpi.add(". ")
    finish(hpi)

    vs = SectionBuilder("vital_signs")
    for measurement, value, unit in spec.vitals:
        vs.add("- ")
        vs.entity(f"{measurement}: {value:g} {unit}", EntityCategory.VITAL)
        vs.add("\n")
    finish(vs)

    al = SectionBuilder("allergies")
    if spec.allergies:
        for i, allergy in enumerate(spec.allergies):
            if i:
                al.add("; ")
            al.entity(allergy, EntityCategory.ALLERGY)
        al.add("\n")
    else:
        al.add("No known drug allergies.\n")
    finish(al)

    # Medical history rides inside the social-history block's sibling section in
    # real notes; here it gets its own sentences in the HPI-adjacent sections.
    sh = SectionBuilder("social_history")
    for i, fact in enumerate(spec.social):
        if i:
            sh.add("; ")
        sh.entity(fact, EntityCategory.SOCIAL_HISTORY)
    sh.add("\n")
    if spec.history:
        sh.add("Past medical history: ")
        for i, condition in enumerate(spec.history):
            if i:
                sh.add(", ")
            sh.entity(condition, EntityCategory.MEDICAL_HISTORY)
        sh.add(".\n")
    finish(sh)

    fh = SectionBuilder("family_history")
    if spec.family:
        for member, conditions in spec.family:
            anchor = fh.entity(member.capitalize() if member == "both parents" else member,
                               EntityCategory.FAMILY_MEMBER)
            fh.add(" with a history of ")
            for i, condition in enumerate(conditions):
                if i:
                    fh.add(" and ")
                fh.entity(condition, EntityCategory.FAMILY_MEDICAL_HISTORY, parent=anchor)
            fh.add(". ")
    else:
        fh.add("Non-contributory.")
    finish(fh)

    note = DischargeNote(
        subject_id=spec.subject_id,
        hadm_id=spec.hadm_id,
        gender=spec.gender,
        age=spec.age,
        ethnicity=spec.ethnicity,
        religion=spec.religion,
        marital_status=spec.marital_status,
        admission_type=spec.admission_type,
        admission_location=spec.admission_location,
        discharge_location=spec.discharge_location,
        insurance=spec.insurance,
        duration_days=spec.duration_days,
        sections=sections,
    )
    return note, spans


# ---------------------------------------------------------------------------
# QA set
# ---------------------------------------------------------------------------


def _norm(text: str) -> str:
    return " ".join("".join(c if c.isalnum() or c.isspace() else " " for c in text.lower()).split())


def qa_item(spec: Spec, category: str, question: str, paraphrases: list[str],
            facts: list[str]) -> dict:
    expected_route = route_question(question)
    for variant in paraphrases:
        assert route_question(variant) == expected_route, (
            f"paraphrase routing mismatch for {variant!r}: "
            f"{route_question(variant)} != {expected_route}"
        )
    assert facts, f"empty expected facts for {question!r}"
    return {
        "subject_id": spec.subject_id,
        "hadm_id": spec.hadm_id,
        "category": category,
        "question": question,
        "expected_facts": sorted({_norm(f) for f in facts}),
        "paraphrases": paraphrases,
    }


def build_qa(cohort: list[Spec]) -> list[dict]:
    items: list[dict] = []
    for index, spec in enumerate(cohort):
        present = [s for s in spec.symptoms if not s.denied]
        items.append(qa_item(
            spec, "Symptom Group",
            "What are all the symptoms that you have?",
            ["Can you list all of your symptoms?",
             "Tell me every symptom you are experiencing.",
             "Which symptoms have been bothering you?"],
            [s.name for s in present],
        ))
        if index % 2 == 0:
            items.append(qa_item(
                spec, "Medical History",
                "What medical conditions have you had in the past?",
                ["Tell me about your medical history.",
                 "What chronic illnesses are in your records?",
                 "What were you diagnosed with before this admission?"],
                spec.history,
            ))
        else:
            items.append(qa_item(
                spec, "Family and Social History",
                "Tell me about your smoking and social background.",
                ["What is your social history?",
                 "Do you smoke or drink alcohol?",
                 "What does your record say about your lifestyle and occupation?"],
                spec.social,
            ))
        if spec.family:
            items.append(qa_item(
                spec, "Family and Social History",
                "What medical problems did your family members have?",
                ["Did any illnesses run in your family?",
                 "What conditions did your relatives have?",
                 "Tell me about your family medical history."],
                [c for _, conditions in spec.family for c in conditions],
            ))
        if spec.allergies:
            items.append(qa_item(
                spec, "Allergy",
                "Do you have any allergies?",
                ["What are you allergic to?",
                 "Are there any allergies in your records?",
                 "Do you have any drug allergies?"],
                spec.allergies,
            ))
        with_duration = next((s for s in present if s.duration), None)
        if with_duration and index % 3 == 0:
            items.append(qa_item(
                spec, "Symptom Group",
                f"What is the duration of the symptom '{with_duration.name}'?",
                [f"How long have you experienced '{with_duration.name}'?",
                 f"Since when have you had '{with_duration.name}'?",
                 f"What duration is recorded for your '{with_duration.name}'?"],
                [with_duration.duration],
            ))
        with_intensity = next((s for s in present if s.intensity), None)
        if with_intensity and index % 3 == 1:
            items.append(qa_item(
                spec, "Symptom Group",
                f"How severe is your '{with_intensity.name}'?",
                [f"How bad is your '{with_intensity.name}'?",
                 f"How intense is the '{with_intensity.name}'?",
                 f"What intensity is recorded for your '{with_intensity.name}'?"],
                [with_intensity.intensity],
            ))
        with_frequency = next((s for s in present if s.frequency), None)
        if with_frequency and index % 3 == 2:
            items.append(qa_item(
                spec, "Symptom Group",
                f"How often does your '{with_frequency.name}' occur?",
                [f"How frequently do you get the '{with_frequency.name}'?",
                 f"What frequency is recorded for your '{with_frequency.name}'?",
                 f"With what frequency does the '{with_frequency.name}' happen?"],
                [with_frequency.frequency],
            ))
        if index % 4 == 0:
            items.append(qa_item(
                spec, "Patient",
                "How old are you?",
                ["What is your age?", "Could you tell me your age?", "May I ask your age?"],
                [str(spec.age)],
            ))
        elif index % 4 == 1:
            items.append(qa_item(
                spec, "Patient",
                "What is your marital status?",
                ["Are you married?", "What does your record list as marital status?",
                 "Is your marital status single or married?"],
                [spec.marital_status],
            ))
        elif index % 4 == 2:
            items.append(qa_item(
                spec, "Admission",
                "What type of admission was this?",
                ["How were you admitted to the hospital?",
                 "Was your admission an emergency or urgent one?",
                 "What kind of hospital admission did you have?"],
                [spec.admission_type],
            ))
        else:
            items.append(qa_item(
                spec, "Admission",
                "What insurance do you have?",
                ["Which insurance covers your admission?",
                 "What insurance plan is on file for this hospital stay?",
                 "Who is the insurance provider for your admission?"],
                [spec.insurance],
            ))
        if index % 5 == 0:
            temperature = next(v for v in spec.vitals if v[0] == "Temperature")
            items.append(qa_item(
                spec, "Vitals",
                "What was your temperature?",
                ["What temperature was recorded for you?",
                 "How high was your temperature?",
                 "What did your temperature measure?"],
                [f"{temperature[1]:g} {temperature[2]}"],
            ))
        elif index % 5 == 1:
            heart = next(v for v in spec.vitals if v[0] == "Heart Rate")
            items.append(qa_item(
                spec, "Vitals",
                "What was your heart rate?",
                ["What heart rate was recorded for you?",
                 "How fast was your heart rate?",
                 "What did your heart rate measure?"],
                [f"{heart[1]:g} {heart[2]}"],
            ))
    return items


def main() -> None:
    notes_dir = FIXTURES / "notes"
    notes_dir.mkdir(parents=True, exist_ok=True)
    for old in notes_dir.glob("*.json"):
        old.unlink()

    all_spans: list[EntitySpan] = []
    notes: list[DischargeNote] = []
    for spec in COHORT:
        note, spans = build_note(spec)
        for span in spans:
            source = note.sections[span.section]
            assert source[span.start:span.end] == span.text, (span, source)
        notes.append(note)
        all_spans.extend(spans)
        path = notes_dir / f"note_{spec.subject_id}_{spec.hadm_id}.json"
        path.write_text(json.dumps(note.to_json(), indent=2, sort_keys=True) + "\n",
                        encoding="utf-8")

    save_spans(all_spans, FIXTURES / "gold_spans.jsonl")

    qa = build_qa(COHORT)
    assert len(qa) >= 60, f"QA fixture has only {len(qa)} items"
    categories = {item["category"] for item in qa}
    assert len(categories) == 7, f"QA fixture covers only {sorted(categories)}"
    with open(FIXTURES / "qa_items.jsonl", "w", encoding="utf-8") as fh:
        for item in qa:
            fh.write(json.dumps(item, sort_keys=True) + "\n")

    # Build the graph through the real mock-extraction pipeline and save it.
    adapter = build_ner_mock(all_spans)
    extractions = [extract_entities(note, adapter) for note in notes]
    graph = build_graph(extractions, notes)
    graph.validate()
    graph.save(FIXTURES / "cohort.aipkg")
    stats = graph.stats()
    print(f"notes: {len(notes)}  gold spans: {len(all_spans)}  qa items: {len(qa)}")
    print(f"graph: {stats.total_nodes} nodes, {stats.total_edges} edges")


if __name__ == "__main__":
    main()
