"""HTTP service exposing the generation and evaluation pipeline.

The CLI talks to this app (in-process by default, over the network with
--server). The /classify endpoints double as a reference implementation of
the classifier wire protocol, so an HttpClassifier can point at this service
to use the rule labeler remotely.
"""
from __future__ import annotations

import tempfile
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from .. import __version__
from ..classify import RuleClassifier
from ..config import parse_config
from ..errors import (
    BackboneError,
    DiscourseGenError,
    JudgeParseError,
)
from ..instruct import ControlSequence, ExposureMode, render_instruction
from ..metrics import parse_judge_score, render_judge_prompt
from ..pipeline import (
    evaluate_records,
    generate_records,
    input_info_from,
    label_records,
    preprocess_records,
    render_heatmap,
    sft_export_records,
)
from ..corpus import CorpusRecord
from ..schema import load_schema, parse_role
from ..textseg import Article, TokenBudget
from . import schemas as S

app = FastAPI(title="discoursegen", version=__version__)


@app.exception_handler(DiscourseGenError)
async def _domain_error_handler(request: Request, exc: DiscourseGenError):
    status = 400
    if isinstance(exc, BackboneError):
        status = 502
    if isinstance(exc, JudgeParseError):
        status = 422
    return JSONResponse(
        status_code=status,
        content={"detail": str(exc), "kind": type(exc).__name__},
    )


@app.get("/health", response_model=S.HealthResponse)
def health():
    return S.HealthResponse(status="ok", version=__version__)


@app.get("/schemas/{domain}", response_model=S.SchemaResponse)
def get_schema(domain: str):
    schema = load_schema(domain)
    return S.SchemaResponse(
        domain=schema.domain,
        roles=[
            S.RoleOut(id=r.id, display=r.display, definition=r.definition)
            for r in schema.roles
        ],
    )


@app.post("/segment", response_model=S.SegmentResponse)
def segment(req: S.SegmentRequest):
    article = Article.from_text(req.article_id, req.text, granularity=req.granularity)
    return S.SegmentResponse(article_id=article.id, units=list(article.units))


@app.post("/instructions/render", response_model=S.RenderInstructionResponse)
def instructions_render(req: S.RenderInstructionRequest):
    schema = load_schema(req.domain)
    seq = ControlSequence(
        tuple(parse_role(schema, label) for label in req.control_sequence)
    )
    instruction = render_instruction(
        input_info_from(req.domain, req.input),
        seq,
        req.step,
        ExposureMode.parse(req.mode),
        req.prev_text,
        schema,
        TokenBudget(max_instruction_tokens=req.max_instruction_tokens),
        req.include_definition,
    )
    return S.RenderInstructionResponse(
        text=instruction.text,
        step=instruction.step_index,
        mode=instruction.mode.value,
    )


@app.post("/preprocess", response_model=S.PreprocessResponse)
def preprocess(req: S.PreprocessRequest):
    accepted, rejected = preprocess_records(req.domain, req.records)
    return S.PreprocessResponse(
        accepted=[r.to_dict() for r in accepted], rejected=rejected
    )


@app.post("/label", response_model=S.LabelResponse)
def label(req: S.LabelRequest):
    config = parse_config(req.config)
    records = [CorpusRecord.from_dict(r) for r in req.records]
    return S.LabelResponse(records=[r.to_dict() for r in label_records(config, records)])


@app.post("/sft/export", response_model=S.SftExportResponse)
def sft_export(req: S.SftExportRequest):
    config = parse_config(req.config)
    records = [CorpusRecord.from_dict(r) for r in req.records]
    return S.SftExportResponse(rows=sft_export_records(config, records))


@app.post("/classify", response_model=S.ClassifyResponse)
def classify(req: S.ClassifyRequest):
    classifier = RuleClassifier(load_schema(req.domain))
    role, confidence = classifier.classify_sentence(
        req.sentence, position=req.position, context=req.context
    )
    return S.ClassifyResponse(role_id=role.id, confidence=confidence)


@app.post("/classify/batch", response_model=S.ClassifyBatchResponse)
def classify_batch(req: S.ClassifyBatchRequest):
    classifier = RuleClassifier(load_schema(req.domain))
    total = len(req.sentences)
    labels = []
    for i, sentence in enumerate(req.sentences, start=1):
        role, confidence = classifier.classify_sentence(sentence, position=(i, total))
        labels.append(S.ClassifyResponse(role_id=role.id, confidence=confidence))
    return S.ClassifyBatchResponse(labels=labels)


@app.post("/generate/batch", response_model=S.GenerateBatchResponse)
def generate_batch(req: S.GenerateBatchRequest):
    config = parse_config(req.config)
    outcome = generate_records(config, req.inputs, fail_fast=req.fail_fast)
    return S.GenerateBatchResponse(
        outputs=outcome.outputs, failures=outcome.failures
    )


@app.post("/evaluate", response_model=S.EvaluateResponse)
def evaluate(req: S.EvaluateRequest):
    config = parse_config(req.config)
    reference = [CorpusRecord.from_dict(r) for r in req.reference]
    report, bins_rows = evaluate_records(config, reference, req.generated)
    return S.EvaluateResponse(
        report=report, bins=[[str(cell) for cell in row] for row in bins_rows]
    )


@app.post("/judge/render", response_model=S.JudgeRenderResponse)
def judge_render(req: S.JudgeRenderRequest):
    return S.JudgeRenderResponse(prompt=render_judge_prompt(req.aspect, req.article))


@app.post("/judge/parse", response_model=S.JudgeParseResponse)
def judge_parse(req: S.JudgeParseRequest):
    return S.JudgeParseResponse(score=parse_judge_score(req.response))


@app.post("/report/heatmap")
def report_heatmap(req: S.HeatmapRequest):
    with tempfile.TemporaryDirectory() as tmp:
        csv_path = Path(tmp) / "bins.csv"
        out_path = Path(tmp) / "heatmap.svg"
        csv_path.write_text(req.csv_text, encoding="utf-8")
        render_heatmap(csv_path, out_path)
        svg = out_path.read_text(encoding="utf-8")
    return Response(content=svg, media_type="image/svg+xml")
