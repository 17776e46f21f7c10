"""Evaluation measures for structure-controlled generation.

The headline measure is positional discourse divergence: articles are cut
into N relative-position bins, discourse-role distributions are estimated
per bin with add-one smoothing, and the result is the mean per-bin KL
divergence (in nats) between the reference and generated corpora. Because
binning works on relative positions, the measure tolerates differing
segmentation styles and article lengths.

Companion measures: per-position exact match of label sequences, ROUGE-L,
sentence and corpus BLEU, perplexity from token logprobs, judge-prompt
rendering and score parsing, and Pearson/Spearman correlation.
"""
from __future__ import annotations

import math
import re
import warnings
from collections import Counter
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

from scipy import stats as _scipy_stats

from .errors import (
    DataError,
    JudgeParseError,
    MetricError,
    UndefinedCorrelationError,
)
from .schema import DiscourseSchema

DEFAULT_BINS = 10

_TOKEN = re.compile(r"\w+")


def tokenize(text: str) -> list[str]:
    """Lowercased tokens split on whitespace and punctuation boundaries."""
    return _TOKEN.findall(text.lower())


# ---------------------------------------------------------------------------
# positional discourse divergence


@dataclass(frozen=True)
class BinnedDistribution:
    """Per-bin role counts and their add-one-smoothed distributions."""

    n_bins: int
    role_ids: tuple[str, ...]
    counts: tuple[tuple[int, ...], ...]       # n_bins rows, one count per role
    probabilities: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        if len(self.counts) != self.n_bins or len(self.probabilities) != self.n_bins:
            raise MetricError("one count row and one probability row per bin required")
        for row in self.probabilities:
            if abs(math.fsum(row) - 1.0) > 1e-12 or any(p <= 0 for p in row):
                raise MetricError("smoothed bin distribution must be positive and sum to 1")


def assign_bin(index: int, length: int, n_bins: int) -> int:
    """Relative-position bin of the 0-based unit index in an L-unit article."""
    if not 0 <= index < length:
        raise MetricError(f"unit index {index} out of range for length {length}")
    return min(index * n_bins // length, n_bins - 1)


def _smooth(counts: Sequence[int]) -> tuple[float, ...]:
    total = sum(counts)
    denom = total + len(counts)
    return tuple((c + 1) / denom for c in counts)


def bin_labels(corpus, n_bins: int, schema: DiscourseSchema) -> BinnedDistribution:
    """Aggregate role counts of labeled articles into relative-position bins.

    corpus is a sequence of LabeledArticle; articles with zero units are
    skipped with a warning rather than poisoning the whole aggregate.
    """
    if n_bins < 1:
        raise MetricError(f"bin count must be >= 1, got {n_bins}")
    if not corpus:
        raise MetricError("cannot bin an empty corpus")
    role_ids = tuple(r.id for r in schema.roles)
    index_of = {rid: k for k, rid in enumerate(role_ids)}
    counts = [[0] * len(role_ids) for _ in range(n_bins)]
    for labeled in corpus:
        length = len(labeled.labels)
        if length == 0:
            warnings.warn(f"skipping article {labeled.article.id!r} with no units")
            continue
        for i, role in enumerate(labeled.labels):
            if role.id not in index_of:
                raise MetricError(
                    f"label {role.id!r} not in schema {schema.domain!r}"
                )
            counts[assign_bin(i, length, n_bins)][index_of[role.id]] += 1
    return BinnedDistribution(
        n_bins=n_bins,
        role_ids=role_ids,
        counts=tuple(tuple(row) for row in counts),
        probabilities=tuple(_smooth(row) for row in counts),
    )


def kl_divergence(p: Sequence[float], q: Sequence[float]) -> float:
    """KL(p || q) in nats for strictly positive distributions."""
    if len(p) != len(q):
        raise MetricError("distributions must have equal support")
    return math.fsum(pi * math.log(pi / qi) for pi, qi in zip(p, q))


def positional_divergence(reference: BinnedDistribution,
                          generated: BinnedDistribution) -> float:
    """Mean per-bin KL(reference || generated), in nats."""
    if reference.n_bins != generated.n_bins:
        raise MetricError(
            f"bin counts differ: {reference.n_bins} vs {generated.n_bins}"
        )
    if reference.role_ids != generated.role_ids:
        raise MetricError("role sets differ between reference and generated corpora")
    per_bin = [
        kl_divergence(p_row, q_row)
        for p_row, q_row in zip(reference.probabilities, generated.probabilities)
    ]
    return math.fsum(per_bin) / reference.n_bins


# ---------------------------------------------------------------------------
# label-sequence exact match


def exact_match_accuracy(ref_sequences, gen_sequences, binary: bool = False) -> float:
    """Mean per-article agreement between reference and generated labels.

    Default scoring is per-position: matched positions over the longer
    length, so extra or missing units cost accuracy. binary=True scores each
    article 1.0 only when the sequences are identical.
    """
    if len(ref_sequences) != len(gen_sequences):
        raise MetricError(
            f"corpus sizes differ: {len(ref_sequences)} vs {len(gen_sequences)}"
        )
    if not ref_sequences:
        raise MetricError("cannot score an empty corpus")
    scores = []
    for ref, gen in zip(ref_sequences, gen_sequences):
        ref = list(ref)
        gen = list(gen)
        if binary:
            scores.append(1.0 if ref == gen else 0.0)
            continue
        longest = max(len(ref), len(gen))
        if longest == 0:
            scores.append(1.0)   # two empty sequences agree vacuously
            continue
        matches = sum(1 for r, g in zip(ref, gen) if r == g)
        scores.append(matches / longest)
    return math.fsum(scores) / len(scores)


# ---------------------------------------------------------------------------
# overlap measures


class RougeScore(NamedTuple):
    precision: float
    recall: float
    f1: float


def _lcs_length(a: list[str], b: list[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for token in a:
        cur = [0]
        for j, other in enumerate(b, start=1):
            if token == other:
                cur.append(prev[j - 1] + 1)
            else:
                cur.append(max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: str, reference: str, beta: float = 1.0) -> RougeScore:
    """Longest-common-subsequence overlap: precision, recall and F_beta.

    beta=1 weighs precision and recall equally; larger beta favors recall
    as in the original recall-oriented formulation.
    """
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not cand or not ref:
        warnings.warn("empty candidate or reference; ROUGE-L defined as zero")
        return RougeScore(0.0, 0.0, 0.0)
    lcs = _lcs_length(cand, ref)
    precision = lcs / len(cand)
    recall = lcs / len(ref)
    if precision + recall == 0:
        return RougeScore(0.0, 0.0, 0.0)
    b2 = beta * beta
    f_score = (1 + b2) * precision * recall / (recall + b2 * precision)
    return RougeScore(precision, recall, f_score)


def _ngram_counts(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _clipped_matches(cand: list[str], ref: list[str], n: int) -> tuple[int, int]:
    cand_counts = _ngram_counts(cand, n)
    ref_counts = _ngram_counts(ref, n)
    matched = sum(min(c, ref_counts[g]) for g, c in cand_counts.items())
    return matched, max(len(cand) - n + 1, 0)


def _brevity_penalty(cand_len: int, ref_len: int) -> float:
    if cand_len >= ref_len:
        return 1.0
    return math.exp(1.0 - ref_len / cand_len)


def bleu(candidate: str, reference: str, max_n: int = 4) -> float:
    """Sentence BLEU: clipped n-gram precision up to min(max_n, |candidate|).

    No smoothing: a zero-match order zeroes the whole score. The brevity
    penalty applies only when the candidate is shorter than the reference.
    """
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not cand:
        warnings.warn("empty candidate; BLEU defined as zero")
        return 0.0
    orders = range(1, min(max_n, len(cand)) + 1)
    log_precisions = []
    for n in orders:
        matched, total = _clipped_matches(cand, ref, n)
        if matched == 0:
            return 0.0
        log_precisions.append(math.log(matched / total))
    return _brevity_penalty(len(cand), len(ref)) * math.exp(
        math.fsum(log_precisions) / len(log_precisions)
    )


def corpus_bleu(pairs, max_n: int = 4) -> float:
    """Corpus BLEU over (candidate, reference) text pairs.

    Clipped matches and totals are pooled across the corpus per order;
    orders no candidate is long enough to produce are dropped.
    """
    pairs = list(pairs)
    if not pairs:
        raise MetricError("cannot score an empty corpus")
    matched = [0] * max_n
    totals = [0] * max_n
    cand_len = 0
    ref_len = 0
    for candidate, reference in pairs:
        cand = tokenize(candidate)
        ref = tokenize(reference)
        cand_len += len(cand)
        ref_len += len(ref)
        for n in range(1, max_n + 1):
            m, t = _clipped_matches(cand, ref, n)
            matched[n - 1] += m
            totals[n - 1] += t
    if cand_len == 0:
        warnings.warn("all candidates empty; corpus BLEU defined as zero")
        return 0.0
    log_precisions = []
    for m, t in zip(matched, totals):
        if t == 0:
            continue
        if m == 0:
            return 0.0
        log_precisions.append(math.log(m / t))
    if not log_precisions:
        return 0.0
    return _brevity_penalty(cand_len, ref_len) * math.exp(
        math.fsum(log_precisions) / len(log_precisions)
    )


# ---------------------------------------------------------------------------
# perplexity


def perplexity(token_logprobs: Sequence[float]) -> float:
    """exp of the negative mean token logprob (natural log)."""
    if not token_logprobs:
        raise MetricError("perplexity requires at least one token logprob")
    if any(lp > 0 for lp in token_logprobs):
        raise DataError("token logprobs must be <= 0")
    return math.exp(-math.fsum(token_logprobs) / len(token_logprobs))


# ---------------------------------------------------------------------------
# judge prompting

JUDGE_PROMPTS = {
    "fluency": (
        "You are a helpful virtual journalist. Please rate the textual fluency "
        "of the following news report with a score from 1 to 5. "
        "Only return the value:"
    ),
    "structure": (
        "You are a helpful virtual journalist. Please rate the structural "
        "coherence and the discourse structure quality of the following new "
        "report with a score from 1 to 5. Only return the value:"
    ),
}

_JUDGE_SCORE = re.compile(r"\b([1-5])\b")


def render_judge_prompt(aspect: str, article: str) -> str:
    if aspect not in JUDGE_PROMPTS:
        raise MetricError(
            f"unknown judge aspect {aspect!r}; expected one of {sorted(JUDGE_PROMPTS)}"
        )
    return f"{JUDGE_PROMPTS[aspect]}\n\n{article}"


def parse_judge_score(response: str) -> int:
    """First integer token in 1..5; anything else is a parse error."""
    found = _JUDGE_SCORE.search(response)
    if not found:
        raise JudgeParseError(response)
    return int(found.group(1))


# ---------------------------------------------------------------------------
# correlation with human scores


def correlate(metric_scores: Sequence[float],
              human_scores: Sequence[float]) -> tuple[float, float]:
    """Pearson r and Spearman rho (average ranks for ties)."""
    if len(metric_scores) != len(human_scores):
        raise MetricError(
            f"score lists differ in length: {len(metric_scores)} vs {len(human_scores)}"
        )
    if len(metric_scores) < 2:
        raise MetricError("correlation requires at least two points")
    for name, series in (("metric", metric_scores), ("human", human_scores)):
        if len(set(series)) == 1:
            raise UndefinedCorrelationError(
                f"{name} scores are constant; correlation is undefined"
            )
    pearson = float(_scipy_stats.pearsonr(metric_scores, human_scores)[0])
    spearman = float(_scipy_stats.spearmanr(metric_scores, human_scores)[0])
    return pearson, spearman


# ---------------------------------------------------------------------------
# report container


@dataclass
class MetricReport:
    """Bundle of corpus-level scores plus any caveat flags raised on the way."""

    pos_divergence: float
    exact_match: float
    rouge_l: float | None = None
    bleu: float | None = None
    perplexity: float | None = None
    judge_fluency: float | None = None
    judge_structure: float | None = None
    flags: list[str] = field(default_factory=list)

    def __post_init__(self):
        for name, value in self.to_dict().items():
            if name == "flags":
                continue
            if value is not None and not math.isfinite(value):
                raise MetricError(f"metric {name} is not finite: {value!r}")
        if self.pos_divergence < 0:
            raise MetricError("positional divergence cannot be negative")
        if not 0.0 <= self.exact_match <= 1.0:
            raise MetricError("exact match must lie in [0, 1]")

    def to_dict(self) -> dict:
        out = {
            "pos_divergence": self.pos_divergence,
            "exact_match": self.exact_match,
            "rouge_l": self.rouge_l,
            "bleu": self.bleu,
            "perplexity": self.perplexity,
            "judge_fluency": self.judge_fluency,
            "judge_structure": self.judge_structure,
            "flags": list(self.flags),
        }
        return {k: v for k, v in out.items() if v is not None}
