"""Request/response bodies for the HTTP API."""

from __future__ import annotations

from pydantic import BaseModel, Field


class CreateSessionRequest(BaseModel):
    annotator_id: str = Field(min_length=1)


class MessageRequest(BaseModel):
    text: str = Field(min_length=1)


class AnnotationRequest(BaseModel):
    # 1-4 scale with four discrete values, no catch-all midpoint
    overall: int = Field(ge=1, le=4)
    good_pairs: list[bool]
    bad_pairs: list[bool]


class TurnView(BaseModel):
    speaker: str
    text: str


class SessionView(BaseModel):
    session_id: str
    state: str
    min_turns: int
    pairs_completed: int
    your_persona: list[str]
    turns: list[TurnView]


class QuestionnaireView(BaseModel):
    overall: str
    good: str
    bad: str


class TranscriptListView(BaseModel):
    records: list[dict]


class HealthView(BaseModel):
    status: str
