"""Interview session registry: creation, lookup, busy-locking, idle eviction.

Sessions are in-memory only.  Each session serializes its own turns through a
non-blocking lock (a second concurrent message gets SessionBusy); distinct
sessions run concurrently over the shared immutable graph.
"""

from __future__ import annotations

import random
import secrets
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from aipatient.adapters import LMAdapter
from aipatient.agents import ConversationHistory, InterviewState, PersonalityProfile, TurnResult, run_turn
from aipatient.kgstore import NodeLabel, PatientGraph, RelType


class SessionError(Exception):
    code = "session_error"


class UnknownPatient(SessionError):
    code = "unknown_patient"


class InvalidProfile(SessionError):
    code = "invalid_profile"


class UnknownSession(SessionError):
    code = "unknown_session"


class SessionBusy(SessionError):
    code = "session_busy"


@dataclass
class Session:
    session_id: str
    state: InterviewState
    created_at: float
    last_used: float
    turn_lock: threading.Lock = field(default_factory=threading.Lock)

    @property
    def personality(self) -> PersonalityProfile:
        return self.state.personality


def resolve_personality(selector, rng: random.Random) -> PersonalityProfile:
    """Accepts a profile index (0..31), the string 'random', or a mapping of
    the five trait names to booleans."""
    if selector == "random":
        return PersonalityProfile.from_index(rng.randrange(32))
    if isinstance(selector, bool):
        raise InvalidProfile(f"invalid personality selector {selector!r}")
    if isinstance(selector, int):
        try:
            return PersonalityProfile.from_index(selector)
        except ValueError as exc:
            raise InvalidProfile(str(exc)) from exc
    if isinstance(selector, dict):
        try:
            return PersonalityProfile(
                openness=bool(selector["openness"]),
                conscientiousness=bool(selector["conscientiousness"]),
                extraversion=bool(selector["extraversion"]),
                agreeableness=bool(selector["agreeableness"]),
                neuroticism=bool(selector["neuroticism"]),
            )
        except KeyError as exc:
            raise InvalidProfile(f"personality mapping is missing trait {exc}") from exc
    raise InvalidProfile(f"invalid personality selector {selector!r}")


class SessionStore:
    def __init__(
        self,
        graph: PatientGraph,
        adapter: LMAdapter,
        prompt_dir: Path | None = None,
        idle_timeout_s: float = 3600.0,
        random_seed: int | None = None,
    ):
        self._graph = graph
        self._adapter = adapter
        self._prompt_dir = prompt_dir
        self._idle_timeout_s = idle_timeout_s
        self._rng = random.Random(random_seed)
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def create(self, subject_id: int, hadm_id: int, personality_selector) -> Session:
        patient = self._graph.find_patient(subject_id)
        admission = self._graph.find_admission(hadm_id)
        if (
            patient is None
            or admission is None
            or not self._graph.has_edge(patient, RelType.HAS_ADMISSION, admission)
        ):
            raise UnknownPatient(
                f"no patient {subject_id} with admission {hadm_id} in the loaded graph"
            )
        profile = resolve_personality(personality_selector, self._rng)
        now = time.monotonic()
        session = Session(
            session_id=secrets.token_urlsafe(16),
            state=InterviewState(
                graph=self._graph,
                adapter=self._adapter,
                subject_id=subject_id,
                hadm_id=hadm_id,
                personality=profile,
                prompt_dir=self._prompt_dir,
            ),
            created_at=now,
            last_used=now,
        )
        with self._lock:
            self._evict_idle(now)
            self._sessions[session.session_id] = session
        return session

    def get(self, session_id: str) -> Session:
        now = time.monotonic()
        with self._lock:
            self._evict_idle(now)
            session = self._sessions.get(session_id)
        if session is None:
            raise UnknownSession(f"no session {session_id}")
        session.last_used = now
        return session

    def delete(self, session_id: str) -> None:
        with self._lock:
            if session_id not in self._sessions:
                raise UnknownSession(f"no session {session_id}")
            del self._sessions[session_id]

    def post_message(self, session_id: str, question: str) -> TurnResult:
        session = self.get(session_id)
        if not session.turn_lock.acquire(blocking=False):
            raise SessionBusy(f"session {session_id} already has a turn in flight")
        try:
            return run_turn(session.state, question)
        finally:
            session.turn_lock.release()

    def history(self, session_id: str) -> ConversationHistory:
        return self.get(session_id).state.history

    def _evict_idle(self, now: float) -> None:
        expired = [
            sid for sid, session in self._sessions.items()
            if now - session.last_used > self._idle_timeout_s
        ]
        for sid in expired:
            del self._sessions[sid]


def patient_roster(graph: PatientGraph) -> list[dict]:
    """One row per (Patient, Admission) pair with demographics."""
    rows = []
    for patient_id in graph.nodes_with_label(NodeLabel.PATIENT):
        patient = graph.node(patient_id)
        for admission_id in graph.out_neighbors(patient_id, RelType.HAS_ADMISSION):
            admission = graph.node(admission_id)
            rows.append(
                {
                    "subject_id": patient.properties["SUBJECT_ID"],
                    "hadm_id": admission.properties["HADM_ID"],
                    "gender": patient.properties["GENDER"],
                    "age": patient.properties["AGE"],
                    "ethnicity": patient.properties["ETHNICITY"],
                    "religion": patient.properties["RELIGION"],
                    "marital_status": patient.properties["MARITAL_STATUS"],
                    "admission_type": admission.properties["ADMISSION_TYPE"],
                    "admission_location": admission.properties["ADMISSION_LOCATION"],
                    "discharge_location": admission.properties["DISCHARGE_LOCATION"],
                    "insurance": admission.properties["INSURANCE"],
                    "duration_days": admission.properties["DURATION"],
                }
            )
    rows.sort(key=lambda r: (r["subject_id"], r["hadm_id"]))
    return rows
