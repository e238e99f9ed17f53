"""Pydantic request/response models for the HTTP API."""

from __future__ import annotations

from typing import Any, Optional, Union

from pydantic import BaseModel, Field


class PatientRow(BaseModel):
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


class PersonalityModel(BaseModel):
    openness: bool
    conscientiousness: bool
    extraversion: bool
    agreeableness: bool
    neuroticism: bool
    index: int
    descriptors: list[str]


class SessionCreateRequest(BaseModel):
    subject_id: int
    hadm_id: int
    personality: Union[int, str, dict[str, bool]] = Field(
        default="random",
        description="profile index 0-31, 'random', or a mapping of the five traits",
    )


class SessionDescriptor(BaseModel):
    session_id: str
    subject_id: int
    hadm_id: int
    personality: PersonalityModel


class MessageRequest(BaseModel):
    text: str = Field(min_length=1)


class SchemaSubsetModel(BaseModel):
    nodes: list[str]
    relationships: list[str]


class TraceModel(BaseModel):
    abstraction: Optional[str]
    schema_subset: Optional[SchemaSubsetModel]
    final_query: Optional[str]
    iterations_used: int


class MessageResponse(BaseModel):
    utterance: str
    fallback: bool
    trace: Optional[TraceModel] = None


class HistoryTurn(BaseModel):
    question: str
    patient_response: str
    fallback: bool
    graph_query: Optional[str]
    result_columns: Optional[list[str]]
    result_rows: Optional[list[list[str]]]
    checker_iterations: int


class HistoryResponse(BaseModel):
    summary: str
    turns: list[HistoryTurn]


class ErrorBody(BaseModel):
    code: str
    detail: str
    stage: Optional[str] = None
