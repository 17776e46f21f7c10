"""Sentence segmentation and token budgeting.

Articles are split into linguistic units (sentences by default, paragraphs
optionally). Token counts use a pluggable estimator; the default is a
word-proportional proxy so the core stays model-agnostic, and backbone
clients can install an exact tokenizer instead.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable

from .errors import BudgetExceededError, EmptyInputError

# Periods after these tokens never end a sentence. Single uppercase initials
# ("F.") are suppressed by rule, not listed.
ABBREVIATIONS = frozenset(
    {
        "mr.", "mrs.", "ms.", "dr.", "prof.", "st.", "sr.", "jr.", "messrs.",
        "gen.", "gov.", "sen.", "rep.", "capt.", "sgt.", "lt.", "col.", "cmdr.",
        "u.s.", "u.k.", "u.n.", "e.u.", "d.c.",
        "etc.", "e.g.", "i.e.", "vs.", "cf.", "al.", "approx.",
        "inc.", "ltd.", "co.", "corp.", "dept.",
        "mt.", "ft.", "no.", "vol.", "fig.", "p.", "pp.",
        "jan.", "feb.", "mar.", "apr.", "jun.", "jul.", "aug.", "sep.",
        "sept.", "oct.", "nov.", "dec.",
        "a.m.", "p.m.",
    }
)

_TERMINATOR = re.compile(r"[.!?]+[\"')\]]?$")
_INITIAL = re.compile(r"^[(\"']?[A-Z]\.$")
_STARTER = re.compile(r"^[\"'(\[‘“]?[A-Z0-9]")


def _ends_sentence(word: str) -> bool:
    """True when a whitespace token can close a sentence."""
    if not _TERMINATOR.search(word):
        return False
    bare = word.rstrip("\"')]")
    if bare.endswith((".",)) and bare.lower() in ABBREVIATIONS:
        return False
    if _INITIAL.match(bare):
        return False
    return True


def segment_sentences(text: str) -> list[str]:
    """Split text into sentences with a deterministic rule.

    A run of {. ! ?} ends a unit when it is followed by whitespace and the
    next token starts with an uppercase letter, a digit, or an opening quote;
    abbreviations and single-letter initials suppress the split. Raises
    EmptyInputError for whitespace-only input; never returns empty units.
    """
    words = text.split()
    if not words:
        raise EmptyInputError("cannot segment empty or whitespace-only text")
    units: list[str] = []
    current: list[str] = []
    for idx, word in enumerate(words):
        current.append(word)
        nxt = words[idx + 1] if idx + 1 < len(words) else None
        if nxt is not None and _ends_sentence(word) and _STARTER.match(nxt):
            units.append(" ".join(current))
            current = []
    if current:
        units.append(" ".join(current))
    return units


def segment_paragraphs(text: str) -> list[str]:
    """Split text into paragraphs on blank lines (coarser unit granularity)."""
    if not text.strip():
        raise EmptyInputError("cannot segment empty or whitespace-only text")
    parts = re.split(r"\n\s*\n", text)
    return [" ".join(p.split()) for p in parts if p.strip()]


@dataclass(frozen=True)
class Article:
    """A document split into ordered units; joining units with single spaces
    reproduces raw up to whitespace normalization."""

    id: str
    units: tuple[str, ...]
    raw: str

    @staticmethod
    def from_text(article_id: str, text: str, granularity: str = "sentence") -> "Article":
        if granularity == "sentence":
            units = segment_sentences(text)
        elif granularity == "paragraph":
            units = segment_paragraphs(text)
        else:
            raise ValueError(f"unknown unit granularity {granularity!r}")
        return Article(article_id, tuple(units), text)


def estimate_tokens(text: str) -> int:
    """Word-proportional token estimate: ceil(1.3 x whitespace-word count)."""
    n = len(text.split())
    return math.ceil(1.3 * n) if n else 0


@dataclass
class TokenBudget:
    max_instruction_tokens: int = 1024
    max_output_tokens: int = 256
    estimator: Callable[[str], int] = field(default=estimate_tokens)

    def __post_init__(self):
        if self.max_instruction_tokens <= 0 or self.max_output_tokens <= 0:
            raise ValueError("token budget counts must be positive")


def truncate_to_budget(prefix: str, context: str, budget: TokenBudget) -> str:
    """Trim context from the beginning until prefix + context fits the budget.

    Whole leading sentences are dropped first; if a single remaining sentence
    still overflows, leading words are dropped. The result is always a suffix
    of the input context at word granularity, possibly empty.
    """
    est = budget.estimator
    if est(prefix) > budget.max_instruction_tokens:
        raise BudgetExceededError(
            f"instruction prefix alone is {est(prefix)} tokens, "
            f"budget is {budget.max_instruction_tokens}"
        )
    if not context.strip():
        return ""
    if est(prefix + context) <= budget.max_instruction_tokens:
        return context

    units = segment_sentences(context)
    dropped = ""
    while units and est(prefix + " ".join(units)) > budget.max_instruction_tokens:
        dropped = units.pop(0)
    if units:
        return " ".join(units)
    # every sentence was dropped: re-admit trailing words of the last one
    words = dropped.split()
    while words and est(prefix + " ".join(words)) > budget.max_instruction_tokens:
        words.pop(0)
    return " ".join(words)
