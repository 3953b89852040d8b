"""Evaluation harness: dataset schema, metrics, baselines, ablations, synthesis."""

from .baselines import (
    BASELINE_SYSTEM_PROMPT,
    build_baseline_prompt,
    parse_prediction,
    run_baseline_rag,
    run_baseline_single_llm,
)
from .dataset import (
    DatasetError,
    DatasetSample,
    DatasetStats,
    compute_stats,
    load_dataset,
    sample_from_obj,
    sample_to_obj,
    save_dataset,
)
from .harness import (
    AblationResult,
    AgentMask,
    DEFAULT_MATRIX,
    FULL_TEAM,
    make_echo_baseline_backend,
    make_echo_deps,
    make_garbage_backend,
    make_garbage_deps,
    run_ablation,
    run_workteam,
    score_predictions,
)
from .metrics import (
    MetricsReport,
    arrangement_match,
    evaluate,
    exact_match,
    parameter_matches,
)
from .report import render_table, report_to_obj
from .synth import generate_synthetic_dataset

__all__ = [
    "AblationResult",
    "AgentMask",
    "BASELINE_SYSTEM_PROMPT",
    "DEFAULT_MATRIX",
    "DatasetError",
    "DatasetSample",
    "DatasetStats",
    "FULL_TEAM",
    "MetricsReport",
    "arrangement_match",
    "build_baseline_prompt",
    "compute_stats",
    "evaluate",
    "exact_match",
    "generate_synthetic_dataset",
    "load_dataset",
    "make_echo_baseline_backend",
    "make_echo_deps",
    "make_garbage_backend",
    "make_garbage_deps",
    "parameter_matches",
    "parse_prediction",
    "render_table",
    "report_to_obj",
    "run_ablation",
    "run_baseline_rag",
    "run_baseline_single_llm",
    "run_workteam",
    "sample_from_obj",
    "sample_to_obj",
    "save_dataset",
    "score_predictions",
]
