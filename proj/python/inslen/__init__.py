"""Object hallucination scoring from model-internal traces."""

from ._core import (
    InslenError,
    TraceContainer,
    aupr,
    auroc,
    calibrate_threshold,
    detector_names,
    is_hallucination,
    logit_lens,
    open_container,
    run_cli,
    score,
    synthesize,
)

__all__ = [
    "InslenError",
    "TraceContainer",
    "aupr",
    "auroc",
    "calibrate_threshold",
    "detector_names",
    "is_hallucination",
    "logit_lens",
    "open_container",
    "run_cli",
    "score",
    "synthesize",
]
