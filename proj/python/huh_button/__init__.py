"""Transcript processing, explanation bundles and emission estimates."""

from ._core import (
    DEFAULT_FACTOR,
    Bundle,
    ContextWindow,
    HuhError,
    LookupResult,
    Segmentation,
    Sentence,
    Transcript,
    TranscriptCue,
    build_prompt,
    context_window,
    demo_transcript,
    derive_factor,
    estimate_kg,
    format_kg,
    generate_bundle,
    main,
    mock_complete,
    parse_cue_json,
    parse_srt,
    parse_transcript,
    parse_vtt,
    restore_punctuation_rule,
    segment,
    slot_count,
)

__all__ = [
    "DEFAULT_FACTOR",
    "Bundle",
    "ContextWindow",
    "HuhError",
    "LookupResult",
    "Segmentation",
    "Sentence",
    "Transcript",
    "TranscriptCue",
    "build_prompt",
    "context_window",
    "demo_transcript",
    "derive_factor",
    "estimate_kg",
    "format_kg",
    "generate_bundle",
    "main",
    "mock_complete",
    "parse_cue_json",
    "parse_srt",
    "parse_transcript",
    "parse_vtt",
    "restore_punctuation_rule",
    "segment",
    "slot_count",
]
