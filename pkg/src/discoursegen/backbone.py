"""Backbone generator clients and the sequential generation loop.

An article is produced one section at a time: each step renders an
instruction naming the next discourse role, hands it to a client, and feeds
the accumulated text back as context for the following step. Clients share
one small interface (complete(instruction, params) -> GenerationResult) so
the loop runs identically against a remote chat-completions service or the
deterministic stubs used in tests.
"""
from __future__ import annotations

import json
import logging
import os
import random
import re
import threading
import time
from dataclasses import dataclass, field

import httpx

from .errors import (
    BackboneError,
    ClientError,
    ConfigurationError,
    GenerationError,
)
from .instruct import (
    ControlSequence,
    ExposureMode,
    InputInfo,
    InstructionText,
    render_instruction,
)
from .schema import DiscourseSchema, parse_role
from .textseg import TokenBudget, segment_sentences

logger = logging.getLogger(__name__)

RETRIABLE_STATUSES = frozenset({429, 500, 502, 503, 504})


@dataclass(frozen=True)
class DecodeParams:
    temperature: float = 0.7
    top_p: float = 0.8
    beam_size: int = 1
    max_output_tokens: int = 256

    def __post_init__(self):
        if self.temperature < 0:
            raise ConfigurationError(f"temperature must be >= 0, got {self.temperature}")
        if not 0 < self.top_p <= 1:
            raise ConfigurationError(f"top_p must be in (0, 1], got {self.top_p}")
        if self.beam_size < 1:
            raise ConfigurationError(f"beam_size must be >= 1, got {self.beam_size}")
        if self.max_output_tokens < 1:
            raise ConfigurationError(
                f"max_output_tokens must be >= 1, got {self.max_output_tokens}"
            )


NEWS_DECODE = DecodeParams(temperature=0.7, top_p=0.8, beam_size=1, max_output_tokens=256)
RECIPE_DECODE = DecodeParams(temperature=0.2, top_p=1.0, beam_size=5, max_output_tokens=256)


def decode_preset(domain: str) -> DecodeParams:
    presets = {"news": NEWS_DECODE, "recipe": RECIPE_DECODE}
    if domain not in presets:
        raise ConfigurationError(f"no decode preset for domain {domain!r}")
    return presets[domain]


@dataclass(frozen=True)
class GenerationResult:
    text: str
    token_logprobs: tuple[tuple[str, float], ...] | None = None
    client_meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class GeneratedArticle:
    input: InputInfo
    control: ControlSequence
    units: tuple[str, ...]
    per_step: tuple[GenerationResult, ...]

    def __post_init__(self):
        if len(self.units) != len(self.control):
            raise GenerationError(
                f"{len(self.units)} units produced for {len(self.control)} control roles"
            )


_DIRECTIVE_ROLE = re.compile(r"Please continue writing a <(.+?)> section")


def _requested_role(instruction: InstructionText, schema: DiscourseSchema):
    found = _DIRECTIVE_ROLE.search(instruction.text)
    if not found:
        raise BackboneError(
            "instruction carries no directive line; cannot infer the requested role"
        )
    return parse_role(schema, found.group(1))


class StubBackboneClient:
    """Deterministic offline client: echoes the requested role in a marker.

    The [[role_id]] marker lets the echo classifier recover the control
    sequence exactly, making end-to-end runs fully predictable.
    """

    def __init__(self, schema: DiscourseSchema):
        self.schema = schema

    def complete(self, instruction: InstructionText, params: DecodeParams) -> GenerationResult:
        role = _requested_role(instruction, self.schema)
        return GenerationResult(
            text=f"[[{role.id}]] A stub {role.id} sentence.",
            client_meta={"latency_ms": 0.0, "client": "stub"},
        )


class RandomRoleStubClient:
    """Stub that ignores the requested role and emits a uniformly random one.

    Serves as the negative control in ordering-sanity checks: its output
    carries no positional structure, so divergence against any structured
    reference must exceed the faithful stub's.
    """

    def __init__(self, schema: DiscourseSchema, seed: int = 0):
        self.schema = schema
        self._rng = random.Random(seed)
        self._lock = threading.Lock()

    def complete(self, instruction: InstructionText, params: DecodeParams) -> GenerationResult:
        with self._lock:
            role = self._rng.choice(self.schema.roles)
        return GenerationResult(
            text=f"[[{role.id}]] A stub {role.id} sentence.",
            client_meta={"latency_ms": 0.0, "client": "stub_random"},
        )


class HttpBackboneClient:
    """Client for an OpenAI-style chat completions endpoint.

    Sends the instruction as a single user message and reads the first
    choice. Transport errors, retriable statuses (429/5xx) and empty
    completions are retried with exponential backoff up to max_attempts.
    Beam search is not available on chat endpoints; beam_size > 1 logs a
    warning and substitutes greedy decoding (temperature 0).
    """

    def __init__(self, url: str, model: str, api_key_env: str = "",
                 max_attempts: int = 3, max_in_flight: int = 4,
                 backoff_base: float = 0.5, timeout: float = 60.0,
                 client: httpx.Client | None = None, sleep=time.sleep):
        if max_attempts < 1:
            raise ConfigurationError("max_attempts must be >= 1")
        if max_in_flight < 1:
            raise ConfigurationError("max_in_flight must be >= 1")
        self.url = url
        self.model = model
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self._sleep = sleep
        self._semaphore = threading.Semaphore(max_in_flight)
        headers = {}
        if api_key_env:
            key = os.environ.get(api_key_env)
            if not key:
                raise ConfigurationError(
                    f"environment variable {api_key_env!r} is not set"
                )
            headers["Authorization"] = f"Bearer {key}"
        self._client = client if client is not None else httpx.Client(
            timeout=timeout, headers=headers
        )
        self._headers = headers
        self._warned_beam = False

    def _payload(self, instruction: InstructionText, params: DecodeParams) -> dict:
        temperature = params.temperature
        if params.beam_size > 1:
            if not self._warned_beam:
                logger.warning(
                    "beam_size %d requested but chat endpoints lack beam search; "
                    "substituting greedy decoding", params.beam_size,
                )
                self._warned_beam = True
            temperature = 0.0
        return {
            "model": self.model,
            "messages": [{"role": "user", "content": instruction.text}],
            "temperature": temperature,
            "top_p": params.top_p,
            "max_tokens": params.max_output_tokens,
        }

    @staticmethod
    def _parse(data: dict) -> GenerationResult:
        try:
            choice = data["choices"][0]
            text = choice["message"]["content"] or ""
        except (KeyError, IndexError, TypeError) as exc:
            raise ClientError(f"malformed completion response: {exc}", status=200) from exc
        logprobs = None
        content = (choice.get("logprobs") or {}).get("content")
        if content:
            logprobs = tuple((t["token"], float(t["logprob"])) for t in content)
        return GenerationResult(text=text, token_logprobs=logprobs)

    def complete(self, instruction: InstructionText, params: DecodeParams) -> GenerationResult:
        payload = self._payload(instruction, params)
        logger.debug("backbone request: %s", json.dumps(payload)[:500])
        failure = "no attempts made"
        last_status = None
        for attempt in range(self.max_attempts):
            if attempt:
                self._sleep(self.backoff_base * (2 ** (attempt - 1)))
            start = time.monotonic()
            try:
                with self._semaphore:
                    response = self._client.post(self.url, json=payload)
            except httpx.HTTPError as exc:
                failure = f"transport error: {exc}"
                logger.debug("attempt %d failed: %s", attempt + 1, failure)
                continue
            latency_ms = (time.monotonic() - start) * 1000.0
            if response.status_code in RETRIABLE_STATUSES:
                failure = f"HTTP {response.status_code}"
                last_status = response.status_code
                continue
            if response.status_code != 200:
                raise ClientError(
                    f"backbone returned HTTP {response.status_code}: "
                    f"{response.text[:200]}",
                    status=response.status_code,
                )
            result = self._parse(response.json())
            if not result.text.strip():
                failure = "empty completion"
                last_status = None
                continue
            meta = dict(result.client_meta)
            meta.update({"latency_ms": latency_ms, "model": self.model})
            return GenerationResult(result.text, result.token_logprobs, meta)
        if failure == "empty completion":
            raise GenerationError(
                f"empty generation after {self.max_attempts} attempts"
            )
        if last_status is not None:
            raise ClientError(
                f"backbone still failing after {self.max_attempts} attempts "
                f"(last: {failure})",
                status=last_status,
            )
        raise BackboneError(
            f"backbone unreachable after {self.max_attempts} attempts (last: {failure})"
        )


def complete(client, instruction: InstructionText, params: DecodeParams) -> GenerationResult:
    return client.complete(instruction, params)


_ROLE_ECHO_LINE = re.compile(r"^\s*<[^<>]{1,60}>\s*:?\s*$")
_SENTENCE_END = re.compile(r"[.!?][\"')\]]*\s*$")


def _postprocess(text: str) -> str:
    """Normalize one completion into a section.

    Chatty models sometimes restate the role on its own line before the
    section; those leading echo lines are dropped. A trailing fragment cut
    off by the output-token cap is trimmed when at least one complete
    sentence precedes it.
    """
    lines = text.splitlines()
    while lines and (not lines[0].strip() or _ROLE_ECHO_LINE.match(lines[0])):
        lines.pop(0)
    joined = " ".join(line.strip() for line in lines if line.strip()).strip()
    if not joined or _SENTENCE_END.search(joined):
        return joined
    sentences = segment_sentences(joined)
    if len(sentences) > 1:
        return " ".join(sentences[:-1])
    return joined


def generate_article(
    input_info: InputInfo,
    seq: ControlSequence,
    mode: ExposureMode,
    client,
    params: DecodeParams,
    schema: DiscourseSchema,
    budget: TokenBudget | None = None,
    include_definition: bool = False,
) -> GeneratedArticle:
    """Run the sequential loop: one client call per control role, in order.

    Each step sees everything generated so far as context. Any failure
    aborts with the completed units attached, so a long batch can be
    debugged without rerunning.
    """
    units: list[str] = []
    per_step: list[GenerationResult] = []
    for i in range(1, len(seq) + 1):
        prev_text = " ".join(units)
        instruction = render_instruction(
            input_info, seq, i, mode, prev_text, schema, budget, include_definition
        )
        try:
            result = client.complete(instruction, params)
        except BackboneError as exc:
            raise GenerationError(
                f"step {i}: {exc}", partial=list(units), step=i
            ) from exc
        unit = _postprocess(result.text)
        if not unit:
            raise GenerationError(
                f"step {i} produced no usable text after cleanup",
                partial=list(units),
                step=i,
            )
        units.append(unit)
        per_step.append(result)
    return GeneratedArticle(
        input=input_info,
        control=seq,
        units=tuple(units),
        per_step=tuple(per_step),
    )
