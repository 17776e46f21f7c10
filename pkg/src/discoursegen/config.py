"""Run configuration: one JSON document drives every pipeline command.

Secrets never live in the config file; the backbone section names an
environment variable and the key is read from the process environment where
the backbone client is built.
"""
from __future__ import annotations

import json
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .backbone import DecodeParams, decode_preset
from .errors import ConfigurationError
from .instruct import ExposureMode
from .schema import DiscourseSchema, load_schema, load_schema_from_file
from .textseg import TokenBudget


class BackboneConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["http", "stub", "stub_random"] = "stub"
    url: str = ""
    model: str = ""
    api_key_env: str = ""
    max_in_flight: int = Field(4, ge=1)
    retries: int = Field(3, ge=1)
    backoff_base: float = Field(0.5, ge=0.0)


class ClassifierConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["rule", "http", "echo"] = "rule"
    url: str = ""


class DecodeConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    temperature: Optional[float] = None
    top_p: Optional[float] = None
    beam_size: Optional[int] = None
    max_output_tokens: Optional[int] = None


class BudgetConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    max_instruction_tokens: int = Field(1024, ge=1)
    max_output_tokens: int = Field(256, ge=1)


class MetricConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    bins: int = Field(10, ge=1, alias="N")
    include_bleu: Optional[bool] = None
    exact_match_binary: bool = False


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    domain: Literal["news", "recipe"]
    mode: Literal["local", "past_aware", "full_structure"] = "past_aware"
    schema_path: Optional[str] = Field(None, alias="schema")
    backbone: BackboneConfig = Field(default_factory=BackboneConfig)
    classifier: ClassifierConfig = Field(default_factory=ClassifierConfig)
    decode: Optional[DecodeConfig] = None
    budget: BudgetConfig = Field(default_factory=BudgetConfig)
    metric: MetricConfig = Field(default_factory=MetricConfig)
    include_definition: Optional[bool] = None
    seed: int = 0

    def resolve_schema(self) -> DiscourseSchema:
        if self.schema_path:
            return load_schema_from_file(self.schema_path)
        return load_schema(self.domain)

    def resolve_mode(self) -> ExposureMode:
        return ExposureMode(self.mode)

    def resolve_decode(self) -> DecodeParams:
        preset = decode_preset(self.domain)
        if self.decode is None:
            return preset
        return DecodeParams(
            temperature=_pick(self.decode.temperature, preset.temperature),
            top_p=_pick(self.decode.top_p, preset.top_p),
            beam_size=_pick(self.decode.beam_size, preset.beam_size),
            max_output_tokens=_pick(
                self.decode.max_output_tokens, preset.max_output_tokens
            ),
        )

    def resolve_budget(self) -> TokenBudget:
        return TokenBudget(
            max_instruction_tokens=self.budget.max_instruction_tokens,
            max_output_tokens=self.budget.max_output_tokens,
        )

    def resolve_include_definition(self, default: Optional[bool] = None) -> bool:
        if self.include_definition is not None:
            return self.include_definition
        if default is not None:
            return default
        # zero-shot chat backbones benefit from the role definition; offline
        # stubs and fine-tuned exports keep the prompt minimal
        return self.backbone.kind == "http"

    def resolve_include_bleu(self) -> bool:
        if self.metric.include_bleu is not None:
            return self.metric.include_bleu
        return self.domain == "recipe"


def _pick(value, fallback):
    return fallback if value is None else value


def parse_config(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigurationError(f"invalid run config: {exc}") from exc


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as handle:
            data = json.load(handle)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(data)
