"""Request and response bodies for the HTTP service."""
from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class RoleOut(BaseModel):
    id: str
    display: str
    definition: str


class SchemaResponse(BaseModel):
    domain: str
    roles: list[RoleOut]


class SegmentRequest(BaseModel):
    text: str
    article_id: str = "article"
    granularity: str = "sentence"


class SegmentResponse(BaseModel):
    article_id: str
    units: list[str]


class RenderInstructionRequest(BaseModel):
    domain: str
    input: dict
    control_sequence: list[str]
    step: int = Field(ge=1)
    mode: str = "past_aware"
    prev_text: str = ""
    include_definition: bool = False
    max_instruction_tokens: int = Field(1024, ge=1)


class RenderInstructionResponse(BaseModel):
    text: str
    step: int
    mode: str


class PreprocessRequest(BaseModel):
    domain: str
    records: list[dict]


class PreprocessResponse(BaseModel):
    accepted: list[dict]
    rejected: list[dict]


class LabelRequest(BaseModel):
    config: dict
    records: list[dict]


class LabelResponse(BaseModel):
    records: list[dict]


class SftExportRequest(BaseModel):
    config: dict
    records: list[dict]


class SftExportResponse(BaseModel):
    rows: list[dict]


# classifier wire protocol: {sentence, context?} -> {role_id, confidence}
class ClassifyRequest(BaseModel):
    sentence: str
    context: Optional[str] = None
    domain: str = "recipe"
    position: Optional[tuple[int, int]] = None


class ClassifyResponse(BaseModel):
    role_id: str
    confidence: float


class ClassifyBatchRequest(BaseModel):
    sentences: list[str]
    domain: str = "recipe"


class ClassifyBatchResponse(BaseModel):
    labels: list[ClassifyResponse]


class GenerateBatchRequest(BaseModel):
    config: dict
    inputs: list[dict]
    fail_fast: bool = False


class GenerateBatchResponse(BaseModel):
    outputs: list[dict]
    failures: list[dict]


class EvaluateRequest(BaseModel):
    config: dict
    reference: list[dict]
    generated: list[dict]


class EvaluateResponse(BaseModel):
    report: dict
    bins: list[list[str]]


class JudgeRenderRequest(BaseModel):
    aspect: str
    article: str


class JudgeRenderResponse(BaseModel):
    prompt: str


class JudgeParseRequest(BaseModel):
    response: str


class JudgeParseResponse(BaseModel):
    score: int


class HeatmapRequest(BaseModel):
    csv_text: str


class ErrorResponse(BaseModel):
    detail: str
    kind: str
