"""Session-based next-item recommendation with GRU networks and dwell-time features.

Thin wrapper over the C++ core; see the repository README for the full CLI
and experiment drivers.
"""

from dwellrec._core import (
    compute_dwell,
    evaluate_checkpoint,
    fold_average,
    format_iso8601_ms,
    mrr_at_k,
    parse_iso8601_ms,
    preprocess_clicks,
    rank_of_target,
    recall_at_k,
    run_experiment,
    synth_generate_csv,
    train_model,
    wilcoxon_signed_rank,
)

__all__ = [
    "compute_dwell",
    "evaluate_checkpoint",
    "fold_average",
    "format_iso8601_ms",
    "mrr_at_k",
    "parse_iso8601_ms",
    "preprocess_clicks",
    "rank_of_target",
    "recall_at_k",
    "run_experiment",
    "synth_generate_csv",
    "train_model",
    "wilcoxon_signed_rank",
]

__version__ = "0.1.0"
