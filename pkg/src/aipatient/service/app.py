"""FastAPI application wrapping the interview workflow and knowledge graph."""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from aipatient.adapters import LMAdapter
from aipatient.agents import AgentStageError, PersonalityProfile, TurnResult
from aipatient.kgstore import PatientGraph

from .config import ServiceConfig, build_adapter
from .models import (
    ErrorBody,
    HistoryResponse,
    HistoryTurn,
    MessageRequest,
    MessageResponse,
    PatientRow,
    PersonalityModel,
    SchemaSubsetModel,
    SessionCreateRequest,
    SessionDescriptor,
    TraceModel,
)
from .sessions import (
    InvalidProfile,
    SessionBusy,
    SessionStore,
    UnknownPatient,
    UnknownSession,
    patient_roster,
)

_ERROR_STATUS = {
    UnknownPatient: 404,
    UnknownSession: 404,
    InvalidProfile: 400,
    SessionBusy: 409,
}


def _personality_model(profile: PersonalityProfile) -> PersonalityModel:
    return PersonalityModel(
        openness=profile.openness,
        conscientiousness=profile.conscientiousness,
        extraversion=profile.extraversion,
        agreeableness=profile.agreeableness,
        neuroticism=profile.neuroticism,
        index=profile.index,
        descriptors=profile.descriptors(),
    )


def _trace_model(turn: TurnResult) -> TraceModel:
    subset = None
    if turn.schema_subset is not None:
        subset = SchemaSubsetModel(
            nodes=[n.value for n in turn.schema_subset.nodes],
            relationships=[r.value for r in turn.schema_subset.relationships],
        )
    return TraceModel(
        abstraction=turn.abstraction,
        schema_subset=subset,
        final_query=turn.final_query,
        iterations_used=turn.iterations_used,
    )


def create_app_from_parts(
    graph: PatientGraph,
    adapter: LMAdapter,
    prompt_dir: Path | None = None,
    idle_timeout_s: float = 3600.0,
    expose_trace: bool = True,
    random_seed: int | None = None,
) -> FastAPI:
    app = FastAPI(title="aipatient", version="0.1.0")
    # The chat client is served as static files from a separate origin.
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    store = SessionStore(
        graph,
        adapter,
        prompt_dir=prompt_dir,
        idle_timeout_s=idle_timeout_s,
        random_seed=random_seed,
    )
    app.state.store = store
    app.state.graph = graph

    @app.exception_handler(UnknownPatient)
    @app.exception_handler(UnknownSession)
    @app.exception_handler(InvalidProfile)
    @app.exception_handler(SessionBusy)
    async def _session_error(request, exc):
        body = ErrorBody(code=exc.code, detail=str(exc))
        return JSONResponse(status_code=_ERROR_STATUS[type(exc)], content=body.model_dump())

    @app.exception_handler(AgentStageError)
    async def _agent_error(request, exc: AgentStageError):
        body = ErrorBody(code="agent_failure", detail=str(exc.cause), stage=exc.stage)
        return JSONResponse(status_code=502, content=body.model_dump())

    @app.get("/patients", response_model=list[PatientRow])
    def patients() -> list[PatientRow]:
        return [PatientRow(**row) for row in patient_roster(graph)]

    @app.post("/sessions", response_model=SessionDescriptor, status_code=201)
    def create_session(request: SessionCreateRequest) -> SessionDescriptor:
        session = store.create(request.subject_id, request.hadm_id, request.personality)
        return SessionDescriptor(
            session_id=session.session_id,
            subject_id=request.subject_id,
            hadm_id=request.hadm_id,
            personality=_personality_model(session.personality),
        )

    @app.post("/sessions/{session_id}/message", response_model=MessageResponse)
    def post_message(session_id: str, request: MessageRequest) -> MessageResponse:
        turn = store.post_message(session_id, request.text)
        return MessageResponse(
            utterance=turn.patient_utterance,
            fallback=turn.fallback,
            trace=_trace_model(turn) if expose_trace else None,
        )

    @app.get("/sessions/{session_id}/history", response_model=HistoryResponse)
    def get_history(session_id: str) -> HistoryResponse:
        history = store.history(session_id)
        turns = []
        for record in history.turns:
            table = record.query_result
            turns.append(
                HistoryTurn(
                    question=record.question,
                    patient_response=record.patient_response,
                    fallback=record.fallback,
                    graph_query=record.graph_query,
                    result_columns=table.columns if table is not None else None,
                    result_rows=table.rendered_rows() if table is not None else None,
                    checker_iterations=len(record.checker_verdicts),
                )
            )
        return HistoryResponse(summary=history.summary, turns=turns)

    @app.delete("/sessions/{session_id}", status_code=204)
    def delete_session(session_id: str) -> Response:
        store.delete(session_id)
        return Response(status_code=204)

    return app


def create_app(config: ServiceConfig) -> FastAPI:
    graph = PatientGraph.load(config.kg_path)
    adapter = build_adapter(config.adapter)
    return create_app_from_parts(
        graph,
        adapter,
        prompt_dir=Path(config.prompt_dir) if config.prompt_dir else None,
        idle_timeout_s=config.session_idle_timeout_s,
        expose_trace=config.expose_trace,
        random_seed=config.random_seed,
    )
