"""Pipeline orchestration: the steps behind every CLI command and service call.

Each stage has an in-memory function working on plain records (so the HTTP
service can call it directly) and a file-level wrapper reading and writing
JSONL. Batch generation parallelizes across articles up to the backbone's
in-flight limit; output files are always written in input order.
"""
from __future__ import annotations

import csv
import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema

from .backbone import (
    HttpBackboneClient,
    RandomRoleStubClient,
    StubBackboneClient,
    generate_article,
)
from .classify import LabeledArticle, build_classifier
from .config import RunConfig
from .corpus import (
    CorpusRecord,
    DuplicateTracker,
    RawRecord,
    clean_news,
    filter_news,
    filter_recipe,
    read_corpus,
    read_jsonl,
    write_jsonl,
)
from .errors import (
    AlignmentError,
    ConfigurationError,
    DataError,
    DiscourseGenError,
    GenerationError,
)
from .instruct import ControlSequence, InputInfo, export_sft_pairs
from .metrics import (
    MetricReport,
    bin_labels,
    corpus_bleu,
    exact_match_accuracy,
    perplexity,
    positional_divergence,
    rouge_l,
)
from .schema import DiscourseSchema, parse_role
from .textseg import Article

_WS = " "


def input_info_from(domain: str, data: dict) -> InputInfo:
    if domain == "news":
        return InputInfo(task="news", headline=str(data.get("headline", "")))
    return InputInfo(
        task="recipe",
        title=str(data.get("title", "")),
        ingredients=tuple(str(x) for x in data.get("ingredients", ())),
    )


def _article_from_record(record: CorpusRecord) -> Article:
    return Article(id=record.id, units=tuple(record.units), raw=_WS.join(record.units))


def _labeled_from_record(record: CorpusRecord, schema: DiscourseSchema) -> LabeledArticle:
    if record.labels is None:
        raise DataError(f"record {record.id!r} carries no labels")
    labels = tuple(parse_role(schema, label) for label in record.labels)
    source = record.source if record.source in ("gold", "silver", "rule") else "gold"
    return LabeledArticle(
        article=_article_from_record(record), labels=labels, source=source
    )


# ---------------------------------------------------------------------------
# preprocess


def preprocess_records(domain: str, raw_rows: list[dict]):
    """Filter and clean raw articles; returns (accepted records, reject rows)."""
    if domain not in ("news", "recipe"):
        raise ConfigurationError(f"unknown domain {domain!r}")
    tracker = DuplicateTracker()
    accepted: list[CorpusRecord] = []
    rejected: list[dict] = []
    for row in raw_rows:
        data = dict(row)
        data.setdefault("domain", domain)
        record = RawRecord.from_dict(data)
        verdict = (
            filter_news(record) if domain == "news"
            else filter_recipe(record, tracker)
        )
        if not verdict.accepted:
            rejected.append({"id": record.id, "reasons": list(verdict.reasons)})
            continue
        body = clean_news(record.body) if domain == "news" else _WS.join(record.body.split())
        if not body.strip():
            rejected.append({"id": record.id, "reasons": ["empty_after_cleaning"]})
            continue
        article = Article.from_text(record.id, body)
        if domain == "news":
            input_data = {"headline": record.title}
        else:
            input_data = {"title": record.title, "ingredients": list(record.ingredients)}
        accepted.append(
            CorpusRecord(
                id=record.id,
                domain=domain,
                input=input_data,
                units=article.units,
            )
        )
    return accepted, rejected


def run_preprocess(domain: str, in_path, out_path, rejects_path=None):
    accepted, rejected = preprocess_records(domain, read_jsonl(in_path))
    write_jsonl(accepted, out_path)
    if rejects_path is not None:
        write_jsonl(rejected, rejects_path)
    return len(accepted), len(rejected)


# ---------------------------------------------------------------------------
# label


def label_records(config: RunConfig, records: list[CorpusRecord]) -> list[CorpusRecord]:
    schema = config.resolve_schema()
    classifier = build_classifier(
        config.classifier.kind, schema, config.classifier.url
    )
    out = []
    for record in records:
        labeled = classifier.label_article(_article_from_record(record))
        out.append(
            CorpusRecord(
                id=record.id,
                domain=record.domain,
                input=record.input,
                units=record.units,
                labels=tuple(role.id for role in labeled.labels),
                source=labeled.source,
            )
        )
    return out


def run_label(config: RunConfig, in_path, out_path):
    records = label_records(config, read_corpus(in_path))
    write_jsonl(records, out_path)
    return len(records)


# ---------------------------------------------------------------------------
# SFT export


def sft_export_records(config: RunConfig, records: list[CorpusRecord]) -> list[dict]:
    schema = config.resolve_schema()
    mode = config.resolve_mode()
    budget = config.resolve_budget()
    include_definition = config.resolve_include_definition(default=False)
    rows = []
    for record in records:
        labeled = _labeled_from_record(record, schema)
        input_info = input_info_from(config.domain, record.input)
        pairs = export_sft_pairs(
            labeled, input_info, mode, schema, budget, include_definition
        )
        for instruction, target in pairs:
            rows.append(
                {
                    "article_id": record.id,
                    "step": instruction.step_index,
                    "instruction": instruction.text,
                    "target": target,
                    "mode": instruction.mode.value,
                }
            )
    return rows


def run_sft_export(config: RunConfig, in_path, out_path):
    rows = sft_export_records(config, read_corpus(in_path))
    write_jsonl(rows, out_path)
    return len(rows)


# ---------------------------------------------------------------------------
# generate


@dataclass
class GenerateOutcome:
    outputs: list[dict]
    failures: list[dict]


def _derived_seed(base_seed: int, record_id: str) -> int:
    digest = hashlib.sha256(f"{base_seed}:{record_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


class _HashingClient:
    """Stamps the sha256 of each instruction into the result metadata."""

    def __init__(self, inner):
        self._inner = inner

    def complete(self, instruction, params):
        digest = hashlib.sha256(instruction.text.encode("utf-8")).hexdigest()
        result = self._inner.complete(instruction, params)
        meta = dict(result.client_meta)
        meta["instruction_sha256"] = digest
        return type(result)(result.text, result.token_logprobs, meta)


def _build_shared_backbone(config: RunConfig, schema: DiscourseSchema):
    kind = config.backbone.kind
    if kind == "stub":
        return StubBackboneClient(schema)
    if kind == "http":
        if not config.backbone.url:
            raise ConfigurationError("http backbone requires a url")
        return HttpBackboneClient(
            url=config.backbone.url,
            model=config.backbone.model,
            api_key_env=config.backbone.api_key_env,
            max_attempts=config.backbone.retries,
            max_in_flight=config.backbone.max_in_flight,
            backoff_base=config.backbone.backoff_base,
        )
    return None   # stub_random clients are built per record for determinism


def generate_records(config: RunConfig, inputs: list[dict],
                     fail_fast: bool = False) -> GenerateOutcome:
    schema = config.resolve_schema()
    mode = config.resolve_mode()
    params = config.resolve_decode()
    budget = config.resolve_budget()
    include_definition = config.resolve_include_definition()
    shared_client = _build_shared_backbone(config, schema)

    def one(row: dict) -> tuple[dict | None, dict | None]:
        record_id = str(row.get("id", ""))
        try:
            if not record_id:
                raise DataError(f"input record has no id: {row!r}")
            if "control_sequence" not in row or not row["control_sequence"]:
                raise DataError(f"record {record_id!r} has no control_sequence")
            input_info = input_info_from(config.domain, row.get("input") or {})
            seq = ControlSequence(
                tuple(parse_role(schema, label) for label in row["control_sequence"])
            )
            client = shared_client
            if client is None:
                client = RandomRoleStubClient(
                    schema, seed=_derived_seed(config.seed, record_id)
                )
            generated = generate_article(
                input_info, seq, mode, _HashingClient(client), params, schema,
                budget, include_definition,
            )
            steps = []
            logprobs = []
            for i, result in enumerate(generated.per_step, start=1):
                steps.append(
                    {
                        "step": i,
                        "instruction_sha256": result.client_meta["instruction_sha256"],
                        "latency_ms": float(result.client_meta.get("latency_ms", 0.0)),
                    }
                )
                if result.token_logprobs:
                    logprobs.extend(lp for _, lp in result.token_logprobs)
            output = {
                "id": record_id,
                "domain": config.domain,
                "input": row.get("input") or {},
                "mode": mode.value,
                "control_sequence": [role.id for role in seq.roles],
                "units": list(generated.units),
                "steps": steps,
            }
            if logprobs:
                output["token_logprobs"] = logprobs
            return output, None
        except DiscourseGenError as exc:
            failure = {"id": record_id, "error": str(exc)}
            if isinstance(exc, GenerationError):
                failure["step"] = exc.step
                failure["partial"] = list(exc.partial)
            return None, failure

    outputs: list[dict] = []
    failures: list[dict] = []
    if fail_fast:
        for row in inputs:
            output, failure = one(row)
            if failure is not None:
                failures.append(failure)
                break
            outputs.append(output)
    else:
        workers = config.backbone.max_in_flight if config.backbone.kind == "http" else 4
        with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
            for output, failure in pool.map(one, inputs):
                if failure is not None:
                    failures.append(failure)
                else:
                    outputs.append(output)
    return GenerateOutcome(outputs=outputs, failures=failures)


def run_generate(config: RunConfig, in_path, out_path, failures_path=None,
                 fail_fast: bool = False) -> GenerateOutcome:
    outcome = generate_records(config, read_jsonl(in_path), fail_fast=fail_fast)
    write_jsonl(outcome.outputs, out_path)
    if failures_path is not None:
        write_jsonl(outcome.failures, failures_path)
    return outcome


# ---------------------------------------------------------------------------
# evaluate


def _generated_labeled(record: dict, schema: DiscourseSchema,
                       classifier) -> tuple[LabeledArticle, bool]:
    """Labeled view of one generated record; True when a classifier ran."""
    record_id = str(record.get("id", ""))
    units = record.get("units")
    if not units:
        text = record.get("text", "")
        if not text.strip():
            raise DataError(f"generated record {record_id!r} has no units or text")
        units = Article.from_text(record_id, text).units
    article = Article(id=record_id, units=tuple(units), raw=_WS.join(units))
    if record.get("labels"):
        labels = tuple(parse_role(schema, label) for label in record["labels"])
        return LabeledArticle(article=article, labels=labels, source="silver"), False
    if classifier is None:
        raise ConfigurationError(
            f"generated record {record_id!r} carries no labels and no classifier "
            "is configured"
        )
    return classifier.label_article(article), True


def evaluate_records(config: RunConfig, reference: list[CorpusRecord],
                     generated: list[dict]):
    """Score a generated corpus against its labeled reference.

    Returns (report dict, bins rows) where bins rows hold the smoothed
    per-bin distributions of both corpora for heatmap plotting.
    """
    schema = config.resolve_schema()
    n_bins = config.metric.bins

    ref_by_id = {r.id: r for r in reference}
    gen_by_id = {str(g.get("id", "")): g for g in generated}
    orphans = sorted(set(ref_by_id) ^ set(gen_by_id))
    if len(ref_by_id) != len(reference):
        raise DataError("duplicate ids in reference corpus")
    if orphans:
        raise AlignmentError(
            f"reference and generated corpora do not align; {len(orphans)} "
            f"orphan id(s): {', '.join(orphans[:10])}",
            orphans=orphans,
        )
    if not reference:
        raise DataError("cannot evaluate an empty corpus")

    classifier = None
    if any(not g.get("labels") for g in generated):
        classifier = build_classifier(
            config.classifier.kind, schema, config.classifier.url
        )

    ref_labeled = []
    gen_labeled = []
    used_classifier = False
    for record in reference:
        ref_labeled.append(_labeled_from_record(record, schema))
        labeled, silver = _generated_labeled(gen_by_id[record.id], schema, classifier)
        gen_labeled.append(labeled)
        used_classifier = used_classifier or silver
    flags = ["generated_labels_are_silver"] if used_classifier else []

    ref_binned = bin_labels(ref_labeled, n_bins, schema)
    gen_binned = bin_labels(gen_labeled, n_bins, schema)
    pos = positional_divergence(ref_binned, gen_binned)
    exact = exact_match_accuracy(
        [[role.id for role in art.labels] for art in ref_labeled],
        [[role.id for role in art.labels] for art in gen_labeled],
        binary=config.metric.exact_match_binary,
    )
    pairs = [
        (gen.article.raw, ref.article.raw)
        for ref, gen in zip(ref_labeled, gen_labeled)
    ]
    rouge_scores = [rouge_l(cand, ref).f1 for cand, ref in pairs]
    mean_rouge = sum(rouge_scores) / len(rouge_scores)

    bleu_score = corpus_bleu(pairs) if config.resolve_include_bleu() else None

    all_logprobs = []
    for record in generated:
        all_logprobs.extend(record.get("token_logprobs") or [])
    ppl = perplexity(all_logprobs) if all_logprobs else None

    report = MetricReport(
        pos_divergence=pos,
        exact_match=exact,
        rouge_l=mean_rouge,
        bleu=bleu_score,
        perplexity=ppl,
        flags=flags,
    )
    report_doc = {
        "domain": config.domain,
        "mode": config.mode,
        "n_articles": len(reference),
        "bins": n_bins,
        "metrics": report.to_dict(),
    }
    validate_report(report_doc)
    bins_rows = _bins_rows(ref_binned, gen_binned)
    return report_doc, bins_rows


def _bins_rows(ref_binned, gen_binned) -> list[list]:
    n = ref_binned.n_bins
    header = ["block", "role"] + [f"bin_{i}" for i in range(n)]
    rows = [header]
    for block, binned in (("reference", ref_binned), ("generated", gen_binned)):
        for k, role_id in enumerate(binned.role_ids):
            probs = [binned.probabilities[b][k] for b in range(n)]
            rows.append([block, role_id] + [repr(p) for p in probs])
    return rows


def validate_report(report_doc: dict) -> None:
    raw = resources.files("discoursegen.data").joinpath(
        "metric_report.schema.json"
    ).read_text()
    jsonschema.validate(report_doc, json.loads(raw))


def run_evaluate(config: RunConfig, reference_path, generated_path,
                 report_path, bins_path=None):
    reference = read_corpus(reference_path)
    generated = read_jsonl(generated_path)
    report_doc, bins_rows = evaluate_records(config, reference, generated)
    with open(report_path, "w", encoding="utf-8") as handle:
        json.dump(report_doc, handle, indent=2, sort_keys=True)
        handle.write("\n")
    if bins_path is not None:
        with open(bins_path, "w", encoding="utf-8", newline="") as handle:
            csv.writer(handle).writerows(bins_rows)
    return report_doc


# ---------------------------------------------------------------------------
# heatmap


def render_heatmap(bins_csv_path, out_path) -> None:
    """Plot the per-bin role distributions of both corpora side by side."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import numpy as np

    blocks: dict[str, list[tuple[str, list[float]]]] = {}
    with open(bins_csv_path, encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if header[:2] != ["block", "role"]:
            raise DataError(f"{bins_csv_path} is not a bins CSV (header {header!r})")
        for row in reader:
            blocks.setdefault(row[0], []).append(
                (row[1], [float(x) for x in row[2:]])
            )
    if not blocks:
        raise DataError(f"{bins_csv_path} contains no distribution rows")

    fig, axes = plt.subplots(
        1, len(blocks), figsize=(6.4 * len(blocks), 4.8), squeeze=False
    )
    for ax, (block, rows) in zip(axes[0], sorted(blocks.items(), reverse=True)):
        roles = [r for r, _ in rows]
        matrix = np.array([probs for _, probs in rows])
        image = ax.imshow(matrix, aspect="auto", cmap="viridis", vmin=0.0)
        ax.set_title(block)
        ax.set_xlabel("relative position bin")
        ax.set_yticks(range(len(roles)))
        ax.set_yticklabels(roles)
        fig.colorbar(image, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
