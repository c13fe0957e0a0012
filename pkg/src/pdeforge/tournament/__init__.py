from .judges import JudgeVerdict, VerdictError, parse_judge_verdict
from .patch import (
    ContextMismatchError,
    MalformedPatchError,
    OverlappingHunksError,
    PatchError,
    apply_patch,
    extract_diff,
    make_diff,
)
from .synthesis import (
    BASELINE_EVALUATIONS,
    Evaluation,
    SynthesisError,
    SynthesisResult,
    TournamentConfig,
    TournamentState,
    TournamentStore,
    detect_saturation,
    hybridization_round,
    initial_judgment,
    parse_schedule,
    run_synthesis,
    select_best,
)

__all__ = [
    "BASELINE_EVALUATIONS",
    "ContextMismatchError",
    "Evaluation",
    "JudgeVerdict",
    "MalformedPatchError",
    "OverlappingHunksError",
    "PatchError",
    "SynthesisError",
    "SynthesisResult",
    "TournamentConfig",
    "TournamentState",
    "TournamentStore",
    "VerdictError",
    "apply_patch",
    "detect_saturation",
    "extract_diff",
    "hybridization_round",
    "initial_judgment",
    "make_diff",
    "parse_judge_verdict",
    "parse_schedule",
    "run_synthesis",
    "select_best",
]
