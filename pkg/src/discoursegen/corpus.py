"""Corpus ingestion: filtering, cleaning, persistence and eval sampling.

Raw news articles and recipes pass through domain-specific filters (hard
rules like length bounds and banned characters, plus clearly flagged
heuristics for comments, multi-report bodies, ads and reviews) and cleaners
before being persisted as JSONL. Heuristic patterns ship as package data so
they can be audited without reading code.
"""
from __future__ import annotations

import hashlib
import json
import random
import re
import threading
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import DataError

# reason ids attached to rejected records; "*_heuristic" marks best-effort rules
REASON_SPECIAL_AT = "special_char_at"
REASON_SPECIAL_BRACKET = "special_char_bracket"
REASON_SPECIAL_PLUS = "special_char_plus"
REASON_LENGTH = "length"
REASON_COMMENT = "comment_heuristic"
REASON_MULTI_REPORT = "multi_report_heuristic"
REASON_DUPLICATE = "duplicate"
REASON_AD = "ad_heuristic"
REASON_REVIEW = "review_heuristic"

NEWS_WORD_BOUNDS = (100, 800)
RECIPE_WORD_BOUNDS = (50, 300)


def _load_heuristics() -> dict:
    raw = resources.files("discoursegen.data").joinpath("filter_heuristics.json").read_text()
    return json.loads(raw)


_HEURISTICS = _load_heuristics()


@dataclass(frozen=True)
class RawRecord:
    id: str
    domain: str
    title: str
    body: str
    ingredients: tuple[str, ...] = ()

    @classmethod
    def from_dict(cls, data: dict) -> "RawRecord":
        if "id" not in data or "domain" not in data:
            raise DataError(f"raw record needs id and domain: {data!r}")
        title = data.get("headline") or data.get("title") or ""
        body = data.get("body")
        if body is None:
            body = data.get("text")
        return cls(
            id=str(data["id"]),
            domain=str(data["domain"]),
            title=str(title),
            body="" if body is None else str(body),
            ingredients=tuple(data.get("ingredients") or ()),
        )


@dataclass(frozen=True)
class FilterVerdict:
    accepted: bool
    reasons: tuple[str, ...] = ()

    def __post_init__(self):
        if self.accepted != (not self.reasons):
            raise DataError("verdict accepted flag must mirror an empty reason list")

    @classmethod
    def from_reasons(cls, reasons) -> "FilterVerdict":
        reasons = tuple(reasons)
        return cls(accepted=not reasons, reasons=reasons)


def _word_count(text: str) -> int:
    return len(text.split())


def _require_body(record: RawRecord) -> str:
    if not record.body or not record.body.strip():
        raise DataError(f"record {record.id!r} has no body")
    return record.body


def filter_news(record: RawRecord) -> FilterVerdict:
    """Apply the news acceptance rules to one record.

    Hard rules: no @, [ or + anywhere in the body; word count within
    [100, 800]. Heuristics (flagged by their reason ids): embedded comment
    lines and bodies that look like several concatenated reports.
    """
    body = _require_body(record)
    reasons = []
    if "@" in body:
        reasons.append(REASON_SPECIAL_AT)
    if "[" in body:
        reasons.append(REASON_SPECIAL_BRACKET)
    if "+" in body:
        reasons.append(REASON_SPECIAL_PLUS)
    lo, hi = NEWS_WORD_BOUNDS
    if not lo <= _word_count(body) <= hi:
        reasons.append(REASON_LENGTH)
    rules = _HEURISTICS["news"]
    prefixes = tuple(rules["comment_line_prefixes"])
    headline_like = 0
    for line in body.splitlines():
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith(prefixes):
            if REASON_COMMENT not in reasons:
                reasons.append(REASON_COMMENT)
        if (
            len(stripped.split()) >= rules["headline_like_min_words"]
            and any(c.isalpha() for c in stripped)
            and stripped == stripped.upper()
        ):
            headline_like += 1
    if headline_like > rules["max_headline_like_lines"]:
        reasons.append(REASON_MULTI_REPORT)
    return FilterVerdict.from_reasons(reasons)


_DATELINE = re.compile(
    r"^[A-Z][A-Z0-9 .,'/-]{0,40}\s*\([^()]{1,60}\)\s*[—–-]+\s*"
)
_BYLINE = re.compile(
    r"^By\s+[A-Z][\w.'-]*(?:\s+[A-Z][\w.'-]*){1,3}\s*[,:—–-]?\s+", re.UNICODE
)
_WHITESPACE_RUN = re.compile(r"\s+")

# BMP symbol blocks commonly used for emoji, plus everything above the BMP
_EMOJI_RANGES = (
    (0x2190, 0x21FF),   # arrows
    (0x2600, 0x27BF),   # misc symbols, dingbats
    (0x2B00, 0x2BFF),   # misc symbols and arrows
    (0xFE00, 0xFE0F),   # variation selectors
    (0x10000, 0x10FFFF),
)


def _is_emoji(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in _EMOJI_RANGES)


def clean_news(text: str) -> str:
    """Normalize a news body: drop emoji, datelines and bylines, tidy spaces.

    Idempotent: cleaning already-clean text changes nothing.
    """
    text = "".join(ch for ch in text if not _is_emoji(ch))
    text = _WHITESPACE_RUN.sub(" ", text).strip()
    # a body may start with several source markers; strip until none match
    changed = True
    while changed:
        changed = False
        for pattern in (_DATELINE, _BYLINE):
            new = pattern.sub("", text, count=1)
            if new != text:
                text = new.lstrip()
                changed = True
    return text.strip()


class DuplicateTracker:
    """Normalized-body hashes seen so far in a run; safe for concurrent use."""

    def __init__(self):
        self._seen: set[str] = set()
        self._lock = threading.Lock()

    @staticmethod
    def fingerprint(body: str) -> str:
        normalized = _WHITESPACE_RUN.sub(" ", body.strip().lower())
        return hashlib.sha256(normalized.encode("utf-8")).hexdigest()

    def check_and_add(self, body: str) -> bool:
        """True if the body was already seen; records it either way."""
        digest = self.fingerprint(body)
        with self._lock:
            if digest in self._seen:
                return True
            self._seen.add(digest)
            return False


def filter_recipe(record: RawRecord, tracker: DuplicateTracker | None = None) -> FilterVerdict:
    """Apply the recipe acceptance rules to one record.

    Hard rules: word count within [50, 300]; duplicate of an earlier body in
    the same run (first occurrence wins). Heuristics: advertising markers
    (URLs and promo phrases) and review-style phrasing.
    """
    body = _require_body(record)
    reasons = []
    lo, hi = RECIPE_WORD_BOUNDS
    if not lo <= _word_count(body) <= hi:
        reasons.append(REASON_LENGTH)
    if tracker is not None and tracker.check_and_add(body):
        reasons.append(REASON_DUPLICATE)
    lowered = body.lower()
    rules = _HEURISTICS["recipe"]
    if any(p in lowered for p in rules["ad_patterns"]):
        reasons.append(REASON_AD)
    if any(p in lowered for p in rules["review_patterns"]):
        reasons.append(REASON_REVIEW)
    return FilterVerdict.from_reasons(reasons)


def sample_eval_subset(corpus: list, n: int, seed: int) -> list:
    """Seeded uniform sample without replacement, returned in id order."""
    if n > len(corpus):
        raise DataError(f"cannot sample {n} records from a corpus of {len(corpus)}")
    rng = random.Random(seed)
    picked = rng.sample(range(len(corpus)), n)
    subset = [corpus[i] for i in picked]
    return sorted(subset, key=_record_id)


def _record_id(record) -> str:
    if isinstance(record, dict):
        return str(record.get("id", ""))
    return str(getattr(record, "id", ""))


# ---------------------------------------------------------------------------
# JSONL persistence for processed corpora


@dataclass(frozen=True)
class CorpusRecord:
    """One processed article: segmented units plus optional role labels."""

    id: str
    domain: str
    input: dict
    units: tuple[str, ...]
    labels: tuple[str, ...] | None = None
    source: str = "gold"

    def __post_init__(self):
        if self.labels is not None and len(self.labels) != len(self.units):
            raise DataError(
                f"record {self.id!r}: {len(self.units)} units vs {len(self.labels)} labels"
            )

    def to_dict(self) -> dict:
        out = {
            "id": self.id,
            "domain": self.domain,
            "input": dict(self.input),
            "units": list(self.units),
            "source": self.source,
        }
        if self.labels is not None:
            out["labels"] = list(self.labels)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "CorpusRecord":
        try:
            labels = data.get("labels")
            return cls(
                id=str(data["id"]),
                domain=str(data["domain"]),
                input=dict(data.get("input") or {}),
                units=tuple(data["units"]),
                labels=None if labels is None else tuple(labels),
                source=str(data.get("source", "gold")),
            )
        except KeyError as exc:
            raise DataError(f"corpus record missing field {exc}") from exc


def read_jsonl(path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
    return records


def write_jsonl(rows, path) -> None:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        for row in rows:
            if hasattr(row, "to_dict"):
                row = row.to_dict()
            handle.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")


def read_corpus(path) -> list[CorpusRecord]:
    records = [CorpusRecord.from_dict(d) for d in read_jsonl(path)]
    seen = set()
    for record in records:
        if record.id in seen:
            raise DataError(f"duplicate record id {record.id!r} in {path}")
        seen.add(record.id)
    return records
