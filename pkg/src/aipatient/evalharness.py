"""Conversation-level evaluation drivers: QA-accuracy ablation over the eight
agent configurations, robustness across question paraphrases, and personality
stability across the 32 profiles.

Every run records one JSON-serializable outcome per executed item so the
summary statistics can be recomputed bit-identically from the persisted
results file, and so humans can re-judge utterances after the fact.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from aipatient.adapters import LMAdapter
from aipatient.agents import (
    AblationConfig,
    AgentError,
    InterviewState,
    PersonalityProfile,
    TurnResult,
    run_turn,
)
from aipatient.kgstore import PatientGraph
from aipatient.metrics import (
    AnovaResult,
    DegenerateWithinVariance,
    TwoPropResult,
    anova_oneway,
    two_proportion_test,
)

QA_CATEGORIES = (
    "Symptom Group",
    "Medical History",
    "Family and Social History",
    "Admission",
    "Patient",
    "Allergy",
    "Vitals",
)

PARAPHRASE_COUNT = 3


class HarnessError(Exception):
    pass


@dataclass(frozen=True)
class QAItem:
    subject_id: int
    hadm_id: int
    category: str
    question: str
    expected_facts: tuple[str, ...]
    paraphrases: tuple[str, str, str]

    def __post_init__(self) -> None:
        if self.category not in QA_CATEGORIES:
            raise HarnessError(f"unknown QA category {self.category!r}")
        if len(self.paraphrases) != PARAPHRASE_COUNT:
            raise HarnessError("each QA item carries exactly 3 paraphrases")
        if not self.expected_facts:
            raise HarnessError("expected fact set must be non-empty")

    @classmethod
    def from_json(cls, payload: dict) -> "QAItem":
        return cls(
            subject_id=int(payload["subject_id"]),
            hadm_id=int(payload["hadm_id"]),
            category=payload["category"],
            question=payload["question"],
            expected_facts=tuple(payload["expected_facts"]),
            paraphrases=tuple(payload["paraphrases"]),
        )


def load_qa_items(path: str | Path) -> list[QAItem]:
    items = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                items.append(QAItem.from_json(json.loads(line)))
    return items


_PUNCT_RE = re.compile(r"[^\w\s]")


def normalize_text(text: str) -> str:
    """Lowercase, strip punctuation, collapse whitespace."""
    return " ".join(_PUNCT_RE.sub(" ", text.lower()).split())


def judge_answer(turn: TurnResult, expected_facts) -> bool:
    """Binary correctness: every expected fact appears (normalized) in the
    utterance, and a fallback turn cannot satisfy a non-empty expectation."""
    facts = {normalize_text(f) for f in expected_facts}
    if turn.fallback:
        return not facts
    utterance = normalize_text(turn.patient_utterance)
    return all(fact in utterance for fact in facts)


@dataclass
class ItemOutcome:
    kind: str  # ablation | robustness | stability-baseline | stability
    group: str  # config key, paraphrase group, or profile key
    subject_id: int
    hadm_id: int
    category: str
    question: str
    correct: bool
    fallback: bool
    utterance: str
    reason: str = ""
    data_loss: bool | None = None

    def to_json(self) -> dict:
        payload = {
            "kind": self.kind,
            "group": self.group,
            "subject_id": self.subject_id,
            "hadm_id": self.hadm_id,
            "category": self.category,
            "question": self.question,
            "correct": self.correct,
            "fallback": self.fallback,
            "utterance": self.utterance,
            "reason": self.reason,
        }
        if self.data_loss is not None:
            payload["data_loss"] = self.data_loss
        return payload

    @classmethod
    def from_json(cls, payload: dict) -> "ItemOutcome":
        return cls(
            kind=payload["kind"],
            group=payload["group"],
            subject_id=payload["subject_id"],
            hadm_id=payload["hadm_id"],
            category=payload["category"],
            question=payload["question"],
            correct=payload["correct"],
            fallback=payload["fallback"],
            utterance=payload["utterance"],
            reason=payload.get("reason", ""),
            data_loss=payload.get("data_loss"),
        )


def save_outcomes(outcomes: list[ItemOutcome], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for outcome in outcomes:
            fh.write(json.dumps(outcome.to_json(), sort_keys=True) + "\n")


def load_outcomes(path: str | Path) -> list[ItemOutcome]:
    outcomes = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                outcomes.append(ItemOutcome.from_json(json.loads(line)))
    return outcomes


def _run_item(
    graph: PatientGraph,
    adapter: LMAdapter,
    item: QAItem,
    question: str,
    config: AblationConfig,
    personality: PersonalityProfile | None,
    prompt_dir: Path | None,
) -> tuple[TurnResult | None, str]:
    """Fresh session per item so phrasing and personality effects are isolated."""
    state = InterviewState(
        graph=graph,
        adapter=adapter,
        subject_id=item.subject_id,
        hadm_id=item.hadm_id,
        personality=personality,
        config=config,
    )
    state.prompt_dir = prompt_dir
    try:
        return run_turn(state, question), ""
    except AgentError as exc:
        return None, str(exc)


def _accuracy(outcomes: list[ItemOutcome]) -> float | None:
    if not outcomes:
        return None
    return sum(1 for o in outcomes if o.correct) / len(outcomes)


# ---------------------------------------------------------------------------
# QA accuracy ablation
# ---------------------------------------------------------------------------


@dataclass
class AblationReport:
    outcomes: list[ItemOutcome]
    categories: tuple[str, ...] = QA_CATEGORIES

    def accuracy(self, config_key: str, category: str | None = None) -> float | None:
        rows = [
            o for o in self.outcomes
            if o.group == config_key and (category is None or o.category == category)
        ]
        return _accuracy(rows)

    def config_keys(self) -> list[str]:
        seen: dict[str, None] = {}
        for outcome in self.outcomes:
            seen.setdefault(outcome.group, None)
        return list(seen)

    def to_tsv(self) -> str:
        header = ["Few Shot", "Retrieval Agent", "Abstraction Agent", "Overall", *self.categories]
        lines = ["\t".join(header)]
        for config in AblationConfig.all_configs():
            key = config.key()
            if key not in self.config_keys():
                continue
            flags = [
                "yes" if config.few_shot else "",
                "yes" if config.use_retrieval_agent else "",
                "yes" if config.use_abstraction_agent else "",
            ]
            cells = [_fmt_acc(self.accuracy(key))]
            cells += [_fmt_acc(self.accuracy(key, category)) for category in self.categories]
            lines.append("\t".join(flags + cells))
        return "\n".join(lines)


def _fmt_acc(value: float | None) -> str:
    return "n/a" if value is None else f"{value * 100:.2f}%"


def run_ablation(
    qa_items: list[QAItem],
    graph: PatientGraph,
    adapter: LMAdapter,
    prompt_dir: Path | None = None,
) -> AblationReport:
    """Execute every item under all eight agent configurations."""
    outcomes: list[ItemOutcome] = []
    for config in AblationConfig.all_configs():
        for item in qa_items:
            turn, reason = _run_item(graph, adapter, item, item.question, config, None, prompt_dir)
            correct = judge_answer(turn, item.expected_facts) if turn is not None else False
            outcomes.append(
                ItemOutcome(
                    kind="ablation",
                    group=config.key(),
                    subject_id=item.subject_id,
                    hadm_id=item.hadm_id,
                    category=item.category,
                    question=item.question,
                    correct=correct,
                    fallback=turn.fallback if turn is not None else False,
                    utterance=turn.patient_utterance if turn is not None else "",
                    reason=reason,
                )
            )
    return AblationReport(outcomes=outcomes)


# ---------------------------------------------------------------------------
# Robustness over paraphrases
# ---------------------------------------------------------------------------

ROBUSTNESS_GROUPS = ("original", "paraphrase_1", "paraphrase_2", "paraphrase_3")


@dataclass
class RobustnessReport:
    outcomes: list[ItemOutcome]
    anova: dict[str, AnovaResult | None] = field(default_factory=dict)
    anova_notes: dict[str, str] = field(default_factory=dict)
    two_prop: dict[tuple[str, str], TwoPropResult] = field(default_factory=dict)

    def group_accuracy(self, group: str, category: str | None = None) -> float | None:
        rows = [
            o for o in self.outcomes
            if o.group == group and (category is None or o.category == category)
        ]
        return _accuracy(rows)

    def to_tsv(self) -> str:
        lines = ["Medical Category\tSum of Squares\tDegree of Freedom\tF\tP-Value"]
        for category in ("Overall", *QA_CATEGORIES):
            if category not in self.anova:
                continue
            result = self.anova[category]
            lines.append(category)
            if result is None:
                lines.append(f"Paraphrase Group\t{self.anova_notes.get(category, 'skipped')}")
                continue
            lines.append(
                f"Paraphrase Group\t{result.ss_between:.4f}\t{result.df_between}"
                f"\t{result.f_value:.4f}\t{result.p_value:.4f}"
            )
            lines.append(f"Residual\t{result.ss_within:.4f}\t{result.df_within}\t\t")
        return "\n".join(lines)


def _grouped_observations(
    outcomes: list[ItemOutcome], groups: tuple[str, ...], category: str | None
) -> list[list[float]]:
    observations = []
    for group in groups:
        rows = [
            1.0 if o.correct else 0.0
            for o in outcomes
            if o.group == group and (category is None or o.category == category)
        ]
        observations.append(rows)
    return [g for g in observations if g]


def _safe_anova(groups: list[list[float]]) -> tuple[AnovaResult | None, str]:
    if len(groups) < 2 or sum(len(g) for g in groups) <= len(groups):
        return None, "not enough observations"
    try:
        return anova_oneway(groups), ""
    except DegenerateWithinVariance:
        return None, "degenerate within-group variance"


def run_robustness(
    qa_items: list[QAItem],
    graph: PatientGraph,
    adapter: LMAdapter,
    config: AblationConfig | None = None,
    prompt_dir: Path | None = None,
) -> RobustnessReport:
    """Answer every item four times (original plus three paraphrases), then
    compare group accuracies with ANOVA and per-paraphrase proportion tests."""
    config = config or AblationConfig()
    outcomes: list[ItemOutcome] = []
    for item in qa_items:
        variants = (item.question, *item.paraphrases)
        for group, question in zip(ROBUSTNESS_GROUPS, variants):
            turn, reason = _run_item(graph, adapter, item, question, config, None, prompt_dir)
            correct = judge_answer(turn, item.expected_facts) if turn is not None else False
            outcomes.append(
                ItemOutcome(
                    kind="robustness",
                    group=group,
                    subject_id=item.subject_id,
                    hadm_id=item.hadm_id,
                    category=item.category,
                    question=question,
                    correct=correct,
                    fallback=turn.fallback if turn is not None else False,
                    utterance=turn.patient_utterance if turn is not None else "",
                    reason=reason,
                )
            )
    return summarize_robustness(outcomes)


def summarize_robustness(outcomes: list[ItemOutcome]) -> RobustnessReport:
    report = RobustnessReport(outcomes=outcomes)
    for category in (None, *QA_CATEGORIES):
        key = category or "Overall"
        groups = _grouped_observations(outcomes, ROBUSTNESS_GROUPS, category)
        if not groups:
            continue
        result, note = _safe_anova(groups)
        report.anova[key] = result
        if note:
            report.anova_notes[key] = note
    for paraphrase in ROBUSTNESS_GROUPS[1:]:
        for category in (None, *QA_CATEGORIES):
            key = category or "Overall"
            originals = [
                o for o in outcomes
                if o.group == "original" and (category is None or o.category == category)
            ]
            variants = [
                o for o in outcomes
                if o.group == paraphrase and (category is None or o.category == category)
            ]
            if not originals or not variants:
                continue
            report.two_prop[(paraphrase, key)] = two_proportion_test(
                sum(1 for o in originals if o.correct),
                len(originals),
                sum(1 for o in variants if o.correct),
                len(variants),
            )
    return report


# ---------------------------------------------------------------------------
# Personality stability
# ---------------------------------------------------------------------------


@dataclass
class StabilityReport:
    outcomes: list[ItemOutcome]  # stability rows carry data_loss per item
    loss_by_profile: dict[str, float] = field(default_factory=dict)
    anova: dict[str, AnovaResult | None] = field(default_factory=dict)
    anova_notes: dict[str, str] = field(default_factory=dict)

    def to_tsv(self) -> str:
        lines = ["Profile\tData Loss Proportion"]
        for profile, proportion in sorted(self.loss_by_profile.items()):
            lines.append(f"{profile}\t{proportion:.4f}")
        lines.append("")
        lines.append("Medical Category\tSum of Squares\tDegree of Freedom\tF\tP-Value")
        for category, result in self.anova.items():
            if result is None:
                lines.append(f"{category}\t{self.anova_notes.get(category, 'skipped')}")
            else:
                lines.append(
                    f"{category}\t{result.ss_between:.4f}\t{result.df_between}"
                    f"\t{result.f_value:.4f}\t{result.p_value:.4f}"
                )
        return "\n".join(lines)


def run_stability(
    qa_items: list[QAItem],
    graph: PatientGraph,
    adapter: LMAdapter,
    config: AblationConfig | None = None,
    prompt_dir: Path | None = None,
) -> StabilityReport:
    """Measure personality-induced data loss against a no-personality baseline.

    An item loses data under a profile when an expected fact that the neutral
    rewrite contained is missing from the personality-infused rewrite.
    """
    config = config or AblationConfig()
    outcomes: list[ItemOutcome] = []

    baseline_facts: dict[int, set[str]] = {}
    for index, item in enumerate(qa_items):
        turn, reason = _run_item(graph, adapter, item, item.question, config, None, prompt_dir)
        utterance = turn.patient_utterance if turn is not None else ""
        normalized = normalize_text(utterance)
        baseline_facts[index] = {
            fact for fact in (normalize_text(f) for f in item.expected_facts)
            if fact in normalized
        }
        outcomes.append(
            ItemOutcome(
                kind="stability-baseline",
                group="baseline",
                subject_id=item.subject_id,
                hadm_id=item.hadm_id,
                category=item.category,
                question=item.question,
                correct=judge_answer(turn, item.expected_facts) if turn is not None else False,
                fallback=turn.fallback if turn is not None else False,
                utterance=utterance,
                reason=reason,
            )
        )

    for profile in PersonalityProfile.all_profiles():
        for index, item in enumerate(qa_items):
            turn, reason = _run_item(
                graph, adapter, item, item.question, config, profile, prompt_dir
            )
            utterance = turn.patient_utterance if turn is not None else ""
            normalized = normalize_text(utterance)
            lost = any(fact not in normalized for fact in baseline_facts[index])
            outcomes.append(
                ItemOutcome(
                    kind="stability",
                    group=profile.key(),
                    subject_id=item.subject_id,
                    hadm_id=item.hadm_id,
                    category=item.category,
                    question=item.question,
                    correct=judge_answer(turn, item.expected_facts) if turn is not None else False,
                    fallback=turn.fallback if turn is not None else False,
                    utterance=utterance,
                    reason=reason,
                    data_loss=lost,
                )
            )
    return summarize_stability(outcomes)


def summarize_stability(outcomes: list[ItemOutcome]) -> StabilityReport:
    report = StabilityReport(outcomes=outcomes)
    profile_rows: dict[str, list[ItemOutcome]] = {}
    for outcome in outcomes:
        if outcome.kind == "stability":
            profile_rows.setdefault(outcome.group, []).append(outcome)
    for profile, rows in profile_rows.items():
        report.loss_by_profile[profile] = sum(1 for r in rows if r.data_loss) / len(rows)

    for category in (None, *QA_CATEGORIES):
        key = category or "Overall"
        groups = []
        for profile in sorted(profile_rows):
            rows = [
                1.0 if r.data_loss else 0.0
                for r in profile_rows[profile]
                if category is None or r.category == category
            ]
            if rows:
                groups.append(rows)
        if not groups:
            continue
        flattened = [x for g in groups for x in g]
        if len(set(flattened)) <= 1:
            report.anova[key] = None
            report.anova_notes[key] = "no statistical test conducted: no variation"
            continue
        result, note = _safe_anova(groups)
        report.anova[key] = result
        if note:
            report.anova_notes[key] = note
    return report
