"""Core operations of the visvar pipeline, backed by the C++ implementation."""

from visvar._core import (
    build_edit_prompt,
    build_question_prompt,
    build_verdict_prompt,
    content_digest,
    gate,
    metrics_from_counts,
    normalize_answer,
    normalize_ws,
    parse_questions,
    parse_variants,
    parse_vote,
    round_half_up,
    score_histogram,
    select_cross_questions,
    tally,
    validate_edit,
    vqascore_question,
)

__all__ = [
    "build_edit_prompt",
    "build_question_prompt",
    "build_verdict_prompt",
    "content_digest",
    "gate",
    "metrics_from_counts",
    "normalize_answer",
    "normalize_ws",
    "parse_questions",
    "parse_variants",
    "parse_vote",
    "round_half_up",
    "score_histogram",
    "select_cross_questions",
    "tally",
    "validate_edit",
    "vqascore_question",
]
