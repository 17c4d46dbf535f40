"""defshift: lexical semantic change detection from generated definitions.

The toolkit turns contextualized definitions of a target word into discrete
senses, compares the sense distributions of two time periods, and ranks words
by how much their meaning changed. See the README for the pipeline overview
and file formats.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .corpus import (
    SamplingConfig,
    TargetWord,
    UsageExample,
    coverage_report,
    find_usages,
    load_targets,
    load_usages,
    sample_usages,
    write_usages,
)
from .defgen import (
    DecodingParams,
    Definition,
    DefinitionBatch,
    build_prompt,
    generate,
    load_definitions,
    register_prompt_template,
    write_definitions,
)
from .distrib import (
    ChangeScoreRecord,
    Provenance,
    cosine_distribution_distance,
    jsd,
    load_scores,
    score_distribution_pairs,
    write_scores,
)
from .embed import (
    EmbeddingSet,
    am,
    apd,
    embed_definitions,
    load_embeddings,
    prt,
    score_embedding_pairs,
    write_embeddings,
)
from .errors import (
    ConfigError,
    DefShiftError,
    FormatError,
    InsufficientDataError,
    ServiceError,
    StageError,
    UndefinedScoreError,
)
from .evaluate import GoldScores, SpearmanResult, evaluate_records, load_gold, spearman, write_evaluation
from .explain import format_report, render_share, report_to_json, shift_summary, top_senses_report
from .lesk import Sense, SenseInventory, lesk_disambiguate, lesk_pipeline, load_inventory
from .merge import MergeConfig, MergeResult, levenshtein, merge_distribution, merge_joint
from .pipeline import Manifest, RunConfig, load_config, run_pipeline
from .sensebank import (
    SenseDistribution,
    build_distribution,
    load_distributions,
    normalize_definition,
    write_distributions,
)

__all__ = [
    "__version__",
    # corpus
    "TargetWord",
    "UsageExample",
    "SamplingConfig",
    "load_targets",
    "find_usages",
    "sample_usages",
    "coverage_report",
    "write_usages",
    "load_usages",
    # definitions
    "DecodingParams",
    "Definition",
    "DefinitionBatch",
    "build_prompt",
    "generate",
    "register_prompt_template",
    "load_definitions",
    "write_definitions",
    # senses
    "SenseDistribution",
    "normalize_definition",
    "build_distribution",
    "write_distributions",
    "load_distributions",
    # merging
    "MergeConfig",
    "MergeResult",
    "levenshtein",
    "merge_distribution",
    "merge_joint",
    # distribution scores
    "Provenance",
    "ChangeScoreRecord",
    "jsd",
    "cosine_distribution_distance",
    "score_distribution_pairs",
    "write_scores",
    "load_scores",
    # embedding scores
    "EmbeddingSet",
    "apd",
    "prt",
    "am",
    "embed_definitions",
    "score_embedding_pairs",
    "write_embeddings",
    "load_embeddings",
    # baseline
    "Sense",
    "SenseInventory",
    "load_inventory",
    "lesk_disambiguate",
    "lesk_pipeline",
    # evaluation
    "GoldScores",
    "SpearmanResult",
    "load_gold",
    "spearman",
    "evaluate_records",
    "write_evaluation",
    # explanation
    "render_share",
    "top_senses_report",
    "shift_summary",
    "format_report",
    "report_to_json",
    # pipeline
    "RunConfig",
    "Manifest",
    "load_config",
    "run_pipeline",
    # errors
    "DefShiftError",
    "ConfigError",
    "FormatError",
    "ServiceError",
    "UndefinedScoreError",
    "InsufficientDataError",
    "StageError",
]
