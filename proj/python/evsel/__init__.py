"""Evidence selection for retrieval-augmented generation."""

from ._core import (
    ConfigError,
    Error,
    MissingArtifactError,
    MockEmbedder,
    chunk_text,
    config_digest,
    cosine_similarity,
    detect_elbow,
    efficiency_ratio,
    poison_sample_size,
    run_build_prefs,
    run_chunk,
    run_eval,
    run_poison,
    run_select,
    select_evidence,
    set_metrics,
)

__all__ = [
    "ConfigError",
    "Error",
    "MissingArtifactError",
    "MockEmbedder",
    "chunk_text",
    "config_digest",
    "cosine_similarity",
    "detect_elbow",
    "efficiency_ratio",
    "poison_sample_size",
    "run_build_prefs",
    "run_chunk",
    "run_eval",
    "run_poison",
    "run_select",
    "select_evidence",
    "set_metrics",
]
