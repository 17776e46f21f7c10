"""Structure-controlled article generation and evaluation.

Generates articles section by section under a per-unit sequence of discourse
roles and measures how well generated text follows the requested structure,
with positional discourse divergence as the headline metric.
"""

__version__ = "0.1.0"

from .errors import DiscourseGenError
from .schema import DiscourseRole, DiscourseSchema, load_schema, parse_role
from .textseg import Article, TokenBudget, estimate_tokens, segment_sentences
from .instruct import (
    ControlSequence,
    ExposureMode,
    InputInfo,
    InstructionText,
    render_instruction,
    export_sft_pairs,
)
from .backbone import (
    DecodeParams,
    GeneratedArticle,
    GenerationResult,
    HttpBackboneClient,
    RandomRoleStubClient,
    StubBackboneClient,
    decode_preset,
    generate_article,
)
from .classify import (
    EchoClassifier,
    HttpClassifier,
    LabeledArticle,
    RuleClassifier,
    build_classifier,
    rule_label_recipe_step,
)
from .metrics import (
    BinnedDistribution,
    MetricReport,
    bin_labels,
    bleu,
    corpus_bleu,
    correlate,
    exact_match_accuracy,
    parse_judge_score,
    perplexity,
    positional_divergence,
    render_judge_prompt,
    rouge_l,
)
from .corpus import (
    CorpusRecord,
    FilterVerdict,
    RawRecord,
    clean_news,
    filter_news,
    filter_recipe,
    sample_eval_subset,
)
from .config import RunConfig, load_config, parse_config

__all__ = [name for name in dir() if not name.startswith("_")]
