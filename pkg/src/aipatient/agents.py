"""The six-agent interview workflow over a pluggable model adapter.

A turn runs three stages: retrieval (schema-subset selection and query
generation), reasoning (question abstraction and a bounded check-and-rephrase
loop), and generation (personality-aware rewrite plus history summarization).
The checker loop runs at most three times; if no result is approved, the
generation stage is skipped and the patient answers exactly "I don't know".
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from aipatient import gql
from aipatient.adapters import AdapterFailure, LMAdapter, reprompt_suffix
from aipatient.gql.executor import ResultTable
from aipatient.kgstore import NodeLabel, PatientGraph, RelType, schema_text
from aipatient.prompting import (
    load_template,
    render_few_shot_block,
    render_history,
    render_result_table,
)

FALLBACK_UTTERANCE = "I don't know"
MAX_CHECK_ITERATIONS = 3
_RETRIES = 2


class AgentError(Exception):
    pass


class QueryGenerationExhausted(AgentError):
    pass


class AgentStageError(AgentError):
    """Wraps any failure inside a turn with the stage and iteration it hit."""

    def __init__(self, stage: str, iteration: int, cause: Exception):
        self.stage = stage
        self.iteration = iteration
        self.cause = cause
        super().__init__(f"stage {stage} (iteration {iteration}): {cause}")


# ---------------------------------------------------------------------------
# Personality profiles
# ---------------------------------------------------------------------------

TRAIT_NAMES = ("openness", "conscientiousness", "extraversion", "agreeableness", "neuroticism")

_TRAIT_DESCRIPTORS = {
    "openness": (
        "Practical, conventional, prefers routine",
        "Inventive, curious, open to new experiences",
    ),
    "conscientiousness": (
        "Impulsive, careless, disorganized",
        "Organized, efficient, dependable",
    ),
    "extraversion": (
        "Quiet, reserved, withdrawn",
        "Outgoing, energetic, talkative",
    ),
    "agreeableness": (
        "Critical, uncooperative, suspicious",
        "Friendly, compassionate, cooperative",
    ),
    "neuroticism": (
        "Calm, even-tempered, secure",
        "Sensitive, nervous, easily upset",
    ),
}


@dataclass(frozen=True)
class PersonalityProfile:
    """One of the 32 high/low combinations over the five trait axes."""

    openness: bool
    conscientiousness: bool
    extraversion: bool
    agreeableness: bool
    neuroticism: bool

    @property
    def index(self) -> int:
        bits = (self.openness, self.conscientiousness, self.extraversion,
                self.agreeableness, self.neuroticism)
        return sum(1 << i for i, bit in enumerate(bits) if bit)

    @classmethod
    def from_index(cls, index: int) -> "PersonalityProfile":
        if not 0 <= index < 32:
            raise ValueError("profile index must be in [0, 32)")
        return cls(*(bool(index >> i & 1) for i in range(5)))

    @classmethod
    def all_profiles(cls) -> list["PersonalityProfile"]:
        return [cls.from_index(i) for i in range(32)]

    def descriptors(self) -> list[str]:
        return [
            _TRAIT_DESCRIPTORS[trait][int(getattr(self, trait))]
            for trait in TRAIT_NAMES
        ]

    def render(self) -> str:
        return "[" + ", ".join(self.descriptors()) + "]"

    def key(self) -> str:
        """Compact label such as O+C-E+A-N+ used in reports."""
        return "".join(
            trait[0].upper() + ("+" if getattr(self, trait) else "-")
            for trait in TRAIT_NAMES
        )


def render_personality(profile: PersonalityProfile | None) -> str:
    return profile.render() if profile is not None else "none (neutral, factual tone)"


# ---------------------------------------------------------------------------
# Workflow data types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SchemaSubset:
    nodes: tuple[NodeLabel, ...]
    relationships: tuple[RelType, ...]

    def render(self) -> str:
        return json.dumps(
            {
                "Nodes": [n.value for n in self.nodes],
                "Relationships": [r.value for r in self.relationships],
            }
        )

    @classmethod
    def full(cls) -> "SchemaSubset":
        return cls(nodes=tuple(NodeLabel), relationships=tuple(RelType))


@dataclass(frozen=True)
class CheckerVerdict:
    approved: bool
    rephrased: str | None = None  # present exactly when not approved


@dataclass(frozen=True)
class TurnRecord:
    question: str
    patient_response: str
    graph_query: str | None
    query_result: ResultTable | None
    checker_verdicts: tuple[CheckerVerdict, ...]
    fallback: bool


@dataclass(frozen=True)
class ConversationHistory:
    summary: str = ""
    turns: tuple[TurnRecord, ...] = ()

    def with_turn(self, turn: TurnRecord, new_summary: str | None = None) -> "ConversationHistory":
        return ConversationHistory(
            summary=self.summary if new_summary is None else new_summary,
            turns=self.turns + (turn,),
        )


@dataclass(frozen=True)
class AblationConfig:
    few_shot: bool = True
    use_retrieval_agent: bool = True
    use_abstraction_agent: bool = True

    @classmethod
    def all_configs(cls) -> list["AblationConfig"]:
        return [
            cls(few_shot=f, use_retrieval_agent=r, use_abstraction_agent=a)
            for f in (True, False)
            for r in (True, False)
            for a in (True, False)
        ]

    def key(self) -> str:
        flags = [
            "few_shot" if self.few_shot else "zero_shot",
            "retrieval" if self.use_retrieval_agent else "no_retrieval",
            "abstraction" if self.use_abstraction_agent else "no_abstraction",
        ]
        return "+".join(flags)


@dataclass(frozen=True)
class TurnResult:
    patient_utterance: str
    final_query: str | None
    result_table: ResultTable | None
    iterations_used: int
    fallback: bool
    abstraction: str | None
    schema_subset: SchemaSubset | None
    history: ConversationHistory


@dataclass
class InterviewState:
    """Runtime binding of one interview: patient identity, personality,
    adapter, graph, and the evolving conversation history."""

    graph: PatientGraph
    adapter: LMAdapter
    subject_id: int
    hadm_id: int
    personality: PersonalityProfile | None = None
    config: AblationConfig = field(default_factory=AblationConfig)
    history: ConversationHistory = field(default_factory=ConversationHistory)
    prompt_dir: Path | None = None


# ---------------------------------------------------------------------------
# Individual agents
# ---------------------------------------------------------------------------


def retrieval_agent(
    user_query: str,
    history: ConversationHistory,
    schema: str,
    adapter: LMAdapter,
    prompt_dir: Path | None = None,
) -> SchemaSubset:
    """Select the schema subset relevant to the question; on persistently
    unparseable output fall back to the full schema."""
    template = load_template("retrieval", prompt_dir)
    base_prompt = template.substitute(
        schema=schema,
        conversation_history=render_history(history.summary),
        user_query=user_query,
    )
    prompt = base_prompt
    for attempt in range(1 + _RETRIES):
        if attempt > 0:
            prompt = base_prompt + reprompt_suffix(attempt, "expected a JSON object")
        completion = adapter.complete(prompt, role="retrieval")
        subset = _parse_schema_subset(completion)
        if subset is not None:
            return subset
    return SchemaSubset.full()


def _parse_schema_subset(completion: str) -> SchemaSubset | None:
    match = re.search(r"\{.*\}", completion, re.DOTALL)
    if match is None:
        return None
    try:
        payload = json.loads(match.group())
        nodes = tuple(NodeLabel(n) for n in payload["Nodes"])
        rels = tuple(RelType(r) for r in payload["Relationships"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError):
        return None
    if not nodes:
        return None
    return SchemaSubset(nodes=nodes, relationships=rels)


def abstraction_agent(
    user_query: str,
    history: ConversationHistory,
    adapter: LMAdapter,
    prompt_dir: Path | None = None,
) -> str:
    """Step back: paraphrase the question into a more general one."""
    template = load_template("abstraction", prompt_dir)
    prompt = template.substitute(
        conversation_history=render_history(history.summary),
        user_query=user_query,
    )
    completion = adapter.complete(prompt, role="abstraction").strip()
    return completion if completion else user_query


def kg_query_agent(
    subject_id: int,
    hadm_id: int,
    subset: SchemaSubset | None,
    abstraction: str | None,
    user_query: str,
    history: ConversationHistory,
    schema: str,
    config: AblationConfig,
    adapter: LMAdapter,
    prompt_dir: Path | None = None,
) -> str:
    """Generate a graph query for the question; the output must parse and must
    filter on this session's patient and admission identifiers."""
    template = load_template("kg_query", prompt_dir)
    nodes_edges = (
        f"\n<nodes_edges>\n{subset.render()}\n</nodes_edges>\n" if subset is not None else ""
    )
    abstraction_context = (
        f"\n<abstraction_context>\n{abstraction}\n</abstraction_context>\n"
        if abstraction is not None
        else ""
    )
    few_shot_block = f"\n{render_few_shot_block(prompt_dir)}\n" if config.few_shot else ""
    base_prompt = template.substitute(
        subject_id=str(subject_id),
        hadm_id=str(hadm_id),
        schema=schema,
        nodes_edges=nodes_edges,
        abstraction_context=abstraction_context,
        few_shot_block=few_shot_block,
        conversation_history=render_history(history.summary),
        user_query=user_query,
    )
    prompt = base_prompt
    last_error = "no attempt made"
    for attempt in range(1 + _RETRIES):
        if attempt > 0:
            prompt = base_prompt + reprompt_suffix(attempt, last_error)
        completion = adapter.complete(prompt, role="kg_query").strip()
        try:
            query = gql.parse(completion)
        except gql.QueryError as exc:
            last_error = str(exc)
            continue
        if not _query_scoped(query, subject_id, hadm_id):
            last_error = "query must filter on the session SUBJECT_ID and HADM_ID"
            continue
        return completion
    raise QueryGenerationExhausted(
        f"no valid query after {_RETRIES} re-prompts (last problem: {last_error})"
    )


def _query_scoped(query: gql.GraphQuery, subject_id: int, hadm_id: int) -> bool:
    """Every Patient pattern must pin SUBJECT_ID and every Admission pattern
    must pin HADM_ID to the session identity, so queries cannot cross over to
    other patients' records."""
    def pinned(node: gql.NodePattern, prop: str, wanted: int) -> bool:
        for name, value in node.props:
            if name == prop and value == wanted:
                return True
        if node.variable is not None and query.where is not None:
            return _where_pins(query.where, node.variable, prop, wanted)
        return False

    saw_identity_filter = False
    for path in query.patterns:
        for node in path.nodes:
            if node.label is NodeLabel.PATIENT:
                if not pinned(node, "SUBJECT_ID", subject_id):
                    return False
                saw_identity_filter = True
            elif node.label is NodeLabel.ADMISSION:
                if not pinned(node, "HADM_ID", hadm_id):
                    return False
                saw_identity_filter = True
    return saw_identity_filter


def _where_pins(pred: gql.Predicate, variable: str, prop: str, wanted: int) -> bool:
    """True when the predicate contains a top-level AND-chain equality pinning
    variable.prop to the wanted value."""
    if isinstance(pred, gql.Comparison):
        if pred.op != "=":
            return False
        operands = (pred.lhs, pred.rhs)
        for ref, literal in (operands, operands[::-1]):
            if (
                isinstance(ref, gql.PropertyRef)
                and ref.variable == variable
                and ref.prop == prop
                and literal == wanted
            ):
                return True
        return False
    if isinstance(pred, gql.And):
        return _where_pins(pred.left, variable, prop, wanted) or _where_pins(
            pred.right, variable, prop, wanted
        )
    return False


def checker_agent(
    user_query: str,
    history: ConversationHistory,
    result_table: ResultTable,
    adapter: LMAdapter,
    prompt_dir: Path | None = None,
) -> CheckerVerdict:
    """Decide whether the retrieved records answer the question; a rejection
    carries a rephrased question for the next query-generation round."""
    template = load_template("checker", prompt_dir)
    base_prompt = template.substitute(
        conversation_history=render_history(history.summary),
        user_query=user_query,
        query_result=render_result_table(result_table),
    )
    prompt = base_prompt
    for attempt in range(1 + _RETRIES):
        if attempt > 0:
            prompt = base_prompt + reprompt_suffix(attempt, "expected Yes or No: <question>")
        completion = adapter.complete(prompt, role="checker").strip()
        verdict = _parse_verdict(completion)
        if verdict is not None:
            return verdict
    # Malformed after retries: treat as a rejection, reusing the original question.
    return CheckerVerdict(approved=False, rephrased=user_query)


def _parse_verdict(completion: str) -> CheckerVerdict | None:
    text = completion.strip()
    if not text:
        return None
    lowered = text.lower()
    if lowered == "yes" or lowered.startswith("yes"):
        return CheckerVerdict(approved=True)
    if lowered.startswith("no"):
        rest = text[2:].lstrip(" :.-\n\t")
        if rest:
            return CheckerVerdict(approved=False, rephrased=rest)
        return None
    return None


def rewrite_agent(
    personality: PersonalityProfile | None,
    user_query: str,
    history: ConversationHistory,
    result_table: ResultTable,
    adapter: LMAdapter,
    prompt_dir: Path | None = None,
) -> str:
    """Turn approved records into a patient utterance in the given persona."""
    template = load_template("rewrite", prompt_dir)
    prompt = template.substitute(
        personality=render_personality(personality),
        conversation_history=render_history(history.summary),
        user_query=user_query,
        query_result=render_result_table(result_table),
    )
    completion = adapter.complete(prompt, role="rewrite").strip()
    if not completion:
        raise AdapterFailure("rewrite returned an empty completion")
    return completion


def summarization_agent(
    history: ConversationHistory,
    result_table: ResultTable,
    patient_response: str,
    adapter: LMAdapter,
    prompt_dir: Path | None = None,
    *,
    turn: TurnRecord,
    subject_id: int,
    hadm_id: int,
) -> ConversationHistory:
    """Append the completed turn and refresh the running summary.  If the
    adapter fails, the turn is still appended and the summary falls back to
    plain concatenation."""
    template = load_template("summarization", prompt_dir)
    prompt = template.substitute(
        subject_id=str(subject_id),
        hadm_id=str(hadm_id),
        conversation_history=render_history(history.summary),
        user_query=turn.question,
        query_result=render_result_table(result_table),
        patient_response=patient_response,
    )
    try:
        summary = adapter.complete(prompt, role="summarization").strip()
    except AdapterFailure:
        summary = ""
    if not summary:
        summary = (history.summary + " " if history.summary else "") + (
            f"Q: {turn.question} A: {patient_response}"
        )
    return history.with_turn(turn, new_summary=summary)


# ---------------------------------------------------------------------------
# Turn orchestration
# ---------------------------------------------------------------------------


def run_turn(session: InterviewState, question: str) -> TurnResult:
    """Run one interview turn through retrieval, reasoning, and generation.

    Any agent failure is re-raised with the stage and checker iteration
    attached; the session history is only updated after a turn completes, so
    the session stays usable after errors.
    """
    stage = "retrieval"
    iteration = 0
    try:
        schema = schema_text()
        subset = (
            retrieval_agent(question, session.history, schema, session.adapter, session.prompt_dir)
            if session.config.use_retrieval_agent
            else None
        )
        stage = "abstraction"
        abstraction = (
            abstraction_agent(question, session.history, session.adapter, session.prompt_dir)
            if session.config.use_abstraction_agent
            else None
        )

        current_question = question
        verdicts: list[CheckerVerdict] = []
        table: ResultTable | None = None
        query_text: str | None = None
        approved = False
        for iteration in range(1, MAX_CHECK_ITERATIONS + 1):
            stage = "kg_query_generation"
            query_text = kg_query_agent(
                session.subject_id,
                session.hadm_id,
                subset,
                abstraction,
                current_question,
                session.history,
                schema,
                session.config,
                session.adapter,
                session.prompt_dir,
            )
            stage = "execution"
            table = gql.execute(gql.parse(query_text), session.graph)
            stage = "checker"
            verdict = checker_agent(
                question, session.history, table, session.adapter, session.prompt_dir
            )
            verdicts.append(verdict)
            if verdict.approved:
                approved = True
                break
            current_question = verdict.rephrased or question

        if approved:
            stage = "rewrite"
            utterance = rewrite_agent(
                session.personality,
                question,
                session.history,
                table,
                session.adapter,
                session.prompt_dir,
            )
            turn = TurnRecord(
                question=question,
                patient_response=utterance,
                graph_query=query_text,
                query_result=table,
                checker_verdicts=tuple(verdicts),
                fallback=False,
            )
            stage = "summarization"
            new_history = summarization_agent(
                session.history,
                table,
                utterance,
                session.adapter,
                session.prompt_dir,
                turn=turn,
                subject_id=session.subject_id,
                hadm_id=session.hadm_id,
            )
        else:
            # Exhausted checker loop: generation stage is skipped entirely and
            # the summary is left untouched (no grounded fact was produced).
            utterance = FALLBACK_UTTERANCE
            turn = TurnRecord(
                question=question,
                patient_response=utterance,
                graph_query=query_text,
                query_result=table,
                checker_verdicts=tuple(verdicts),
                fallback=True,
            )
            new_history = session.history.with_turn(turn)
    except Exception as exc:
        raise AgentStageError(stage, iteration, exc) from exc

    session.history = new_history
    return TurnResult(
        patient_utterance=utterance,
        final_query=query_text if approved else None,
        result_table=table if approved else None,
        iterations_used=iteration,
        fallback=not approved,
        abstraction=abstraction,
        schema_subset=subset,
        history=new_history,
    )
