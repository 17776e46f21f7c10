"""Sentence-level discourse role classifiers.

Three interchangeable classifiers cover the pipeline's needs:

- RuleClassifier: keyword lexicons for recipe steps, no model required.
- HttpClassifier: remote classifier speaking a small JSON protocol.
- EchoClassifier: reads a role marker planted in the sentence itself; used by
  stub backbones so end-to-end runs are deterministic.

Each exposes classify_sentence(sentence, position=None, context=None)
returning (DiscourseRole, confidence) and label_article(article) returning a
LabeledArticle.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources

import httpx

from .errors import ClassificationError, EmptyInputError, ProtocolError, UnknownLabelError
from .schema import DiscourseRole, DiscourseSchema, load_schema, parse_role
from .textseg import Article

LABEL_SOURCES = ("gold", "silver", "rule")


@dataclass(frozen=True)
class LabeledArticle:
    article: Article
    labels: tuple[DiscourseRole, ...]
    source: str = "gold"

    def __post_init__(self):
        if len(self.labels) != len(self.article.units):
            raise ClassificationError(
                f"article {self.article.id!r}: {len(self.article.units)} units "
                f"vs {len(self.labels)} labels"
            )
        if self.source not in LABEL_SOURCES:
            raise ClassificationError(
                f"label source must be one of {LABEL_SOURCES}, got {self.source!r}"
            )


@dataclass(frozen=True)
class RuleLexicon:
    """Keyword lists per role plus the priority order that resolves ties.

    Ships as package data (data/recipe_lexicon.json) so the rules can be
    audited or extended without touching code.
    """

    keywords: dict[str, tuple[str, ...]]
    priority: tuple[str, ...]
    default_role: str = "general"
    positional_final_role: str = "final"

    def __post_init__(self):
        missing = [r for r in self.priority if r not in self.keywords]
        if missing:
            raise ClassificationError(f"priority lists roles without keywords: {missing}")

    @classmethod
    def from_dict(cls, data: dict) -> "RuleLexicon":
        return cls(
            keywords={k: tuple(v) for k, v in data["keywords"].items()},
            priority=tuple(data["priority"]),
            default_role=data.get("default_role", "general"),
            positional_final_role=data.get("positional_final_role", "final"),
        )


def load_default_lexicon() -> RuleLexicon:
    raw = resources.files("discoursegen.data").joinpath("recipe_lexicon.json").read_text()
    return RuleLexicon.from_dict(json.loads(raw))


_WORD = re.compile(r"[a-z]+")


def _stem(token: str) -> str:
    """Strip a trailing -ing/-ed when a stem of at least 3 chars remains."""
    for suffix in ("ing", "ed"):
        if token.endswith(suffix) and len(token) - len(suffix) >= 3:
            return token[: -len(suffix)]
    return token


def _matches(token: str, keyword: str) -> bool:
    if token == keyword:
        return True
    stem = _stem(token)
    if stem == keyword or keyword == stem + "e":
        return True
    # doubled final consonant before the suffix: stirring -> stirr -> stir
    if len(stem) >= 2 and stem[-1] == stem[-2] and stem[:-1] == keyword:
        return True
    return False


def _lexicon_hit(tokens: list[str], keywords: tuple[str, ...]) -> bool:
    return any(_matches(t, kw) for t in tokens for kw in keywords)


def rule_label_recipe_step(
    sentence: str,
    position: tuple[int, int] | None = None,
    lexicon: RuleLexicon | None = None,
) -> str:
    """Label one recipe sentence with a role id using keyword lexicons.

    position is (i, total), 1-based. The final role fires only through its
    positional override: the last step of a recipe mentioning a serve-class
    verb. Everywhere else the scan covers the remaining roles from latest
    pipeline stage to earliest, so "pour and bake" counts as cooking.
    Sentences matching nothing get the default role.
    """
    if not sentence or not sentence.strip():
        raise EmptyInputError("cannot label an empty sentence")
    lex = lexicon if lexicon is not None else _DEFAULT_LEXICON
    tokens = _WORD.findall(sentence.lower())
    final_role = lex.positional_final_role
    if position is not None:
        i, total = position
        if i == total and _lexicon_hit(tokens, lex.keywords.get(final_role, ())):
            return final_role
    for role_id in lex.priority:
        if role_id == final_role:
            continue
        if _lexicon_hit(tokens, lex.keywords[role_id]):
            return role_id
    return lex.default_role


_DEFAULT_LEXICON = load_default_lexicon()


class RuleClassifier:
    """Lexicon-driven classifier for the recipe schema. Always confidence 1.0."""

    source = "rule"

    def __init__(self, schema: DiscourseSchema | None = None,
                 lexicon: RuleLexicon | None = None):
        self.schema = schema if schema is not None else load_schema("recipe")
        if self.schema.domain != "recipe":
            raise ClassificationError(
                f"rule classifier only supports the recipe schema, got {self.schema.domain!r}"
            )
        self.lexicon = lexicon if lexicon is not None else _DEFAULT_LEXICON

    def classify_sentence(self, sentence: str, position=None, context=None):
        if position is None:
            position = (1, 1)
        role_id = rule_label_recipe_step(sentence, position, self.lexicon)
        return self.schema.role_by_id(role_id), 1.0

    def label_article(self, article: Article) -> LabeledArticle:
        return _label_units(self, article)


_ECHO_MARKER = re.compile(r"\[\[([^\[\]]+)\]\]")


class EchoClassifier:
    """Reads a [[role_id]] marker embedded in the sentence.

    Stub backbones plant the marker, so echo classification recovers the
    requested role exactly. Sentences without a marker are an error: they
    mean the transcript did not come from a stub run.
    """

    source = "silver"

    def __init__(self, schema: DiscourseSchema):
        self.schema = schema

    def classify_sentence(self, sentence: str, position=None, context=None):
        found = _ECHO_MARKER.search(sentence)
        if not found:
            raise ClassificationError(
                f"no [[role]] marker in sentence {sentence!r}; "
                "echo classification only works on stub-generated text"
            )
        try:
            return parse_role(self.schema, found.group(1)), 1.0
        except UnknownLabelError as exc:
            raise ClassificationError(str(exc)) from exc

    def label_article(self, article: Article) -> LabeledArticle:
        return _label_units(self, article)


class HttpClassifier:
    """Client for a remote classifier service.

    Wire protocol: POST {url}/classify with {"sentence": ..., "context": ...}
    returns {"role_id": ..., "confidence": ...}; POST {url}/classify/batch
    with {"sentences": [...]} returns {"labels": [{"role_id": ...}, ...]}.
    """

    source = "silver"

    def __init__(self, url: str, schema: DiscourseSchema, timeout: float = 30.0,
                 client: httpx.Client | None = None):
        self.url = url.rstrip("/")
        self.schema = schema
        self._client = client if client is not None else httpx.Client(timeout=timeout)

    def _post(self, path: str, payload: dict) -> dict:
        try:
            response = self._client.post(self.url + path, json=payload)
        except httpx.HTTPError as exc:
            raise ClassificationError(f"classifier request failed: {exc}") from exc
        if response.status_code != 200:
            raise ClassificationError(
                f"classifier returned HTTP {response.status_code}: {response.text[:200]}"
            )
        try:
            return response.json()
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"classifier returned invalid JSON: {exc}") from exc

    def _parse_label(self, payload) -> tuple[DiscourseRole, float]:
        if not isinstance(payload, dict) or "role_id" not in payload:
            raise ProtocolError(f"classifier response missing role_id: {payload!r}")
        try:
            role = parse_role(self.schema, str(payload["role_id"]))
        except UnknownLabelError as exc:
            raise ProtocolError(str(exc)) from exc
        return role, float(payload.get("confidence", 1.0))

    def classify_sentence(self, sentence: str, position=None, context=None):
        payload = {"sentence": sentence}
        if context:
            payload["context"] = context
        return self._parse_label(self._post("/classify", payload))

    def label_article(self, article: Article) -> LabeledArticle:
        data = self._post("/classify/batch", {"sentences": list(article.units)})
        raw = data.get("labels")
        if not isinstance(raw, list) or len(raw) != len(article.units):
            raise ProtocolError(
                f"batch response must carry one label per sentence, got {raw!r}"
            )
        labels = tuple(self._parse_label(item)[0] for item in raw)
        return LabeledArticle(article=article, labels=labels, source=self.source)


def _label_units(classifier, article: Article) -> LabeledArticle:
    if not article.units:
        raise EmptyInputError(f"article {article.id!r} has no units to label")
    total = len(article.units)
    labels = []
    for i, unit in enumerate(article.units, start=1):
        try:
            role, _ = classifier.classify_sentence(
                unit, position=(i, total), context=article.raw
            )
        except ClassificationError as exc:
            raise ClassificationError(f"unit {i} of {article.id!r}: {exc}") from exc
        labels.append(role)
    return LabeledArticle(article=article, labels=tuple(labels), source=classifier.source)


def build_classifier(kind: str, schema: DiscourseSchema, url: str = ""):
    if kind == "rule":
        return RuleClassifier(schema)
    if kind == "echo":
        return EchoClassifier(schema)
    if kind == "http":
        if not url:
            raise ClassificationError("http classifier requires a url")
        return HttpClassifier(url, schema)
    raise ClassificationError(f"unknown classifier kind {kind!r}")
