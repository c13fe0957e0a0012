from .debug import debug_loop
from .evaluator import HarnessEvaluator
from .runner import (
    DEFAULT_COMMAND,
    STATUSES,
    ExecutionLimits,
    ExecutionResult,
    execute,
    guest_arguments,
    parse_diagnostics,
)

__all__ = [
    "DEFAULT_COMMAND",
    "STATUSES",
    "ExecutionLimits",
    "ExecutionResult",
    "HarnessEvaluator",
    "debug_loop",
    "execute",
    "guest_arguments",
    "parse_diagnostics",
]
