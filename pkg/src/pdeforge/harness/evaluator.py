"""Execute, repair if needed, and score a candidate for the tournament."""

from __future__ import annotations

import re
from pathlib import Path

from ..domain import GridSpec, PdeTask
from ..genesis import SolverCandidate
from ..llm import Gateway
from ..metrics import FeedbackType, MetricError, compute_feedback
from ..prompts import DEFAULT_PROMPTS, PromptSet
from ..tournament.synthesis import Evaluation
from .debug import debug_loop
from .runner import DEFAULT_COMMAND, ExecutionLimits, ExecutionResult, execute


class HarnessEvaluator:
    def __init__(
        self,
        task: PdeTask,
        grid: GridSpec,
        inputs,
        feedback: FeedbackType,
        reference=None,
        limits: ExecutionLimits = ExecutionLimits(),
        gateway: Gateway | None = None,
        model_id: str = "",
        prompts: PromptSet = DEFAULT_PROMPTS,
        exec_root=None,
        guest_command=DEFAULT_COMMAND,
    ):
        if feedback.requires_reference and reference is None:
            raise MetricError("nRMSE feedback needs a reference solution")
        self.task, self.grid, self.inputs = task, grid, inputs
        self.feedback = feedback
        self.reference = reference
        self.limits = limits
        self.gateway = gateway
        self.model_id = model_id
        self.prompts = prompts
        self.exec_root = Path(exec_root) if exec_root else None
        self.guest_command = guest_command

    def run(self, candidate: SolverCandidate) -> ExecutionResult:
        wd = None
        if self.exec_root is not None:
            wd = self.exec_root / re.sub(r"[^A-Za-z0-9_.-]", "_", candidate.candidate_id)
        return execute(candidate, self.task, self.grid, self.inputs, self.limits, wd, self.guest_command)

    def score(self, result: ExecutionResult):
        if not result.ok:
            return [], None, None
        try:
            records = compute_feedback(self.feedback, self.task, self.grid, result.solution,
                                       inputs=self.inputs, reference=self.reference)
        except MetricError as exc:
            return [], None, str(exc)
        headline = self.feedback.headline
        value = next((r.value for r in records if r.metric_id == headline), None)
        return records, value, None

    def __call__(self, candidate: SolverCandidate, purpose: str) -> Evaluation:
        result = self.run(candidate)
        final, produced = candidate, []
        if not result.ok and self.gateway is not None:
            final, result, produced = debug_loop(candidate, result, self.gateway, self.model_id, self.limits,
                                                 self.run, self.prompts, f"debug.{purpose}")
        records, value, metric_error = self.score(result)
        diagnostics = dict(result.diagnostics)
        if metric_error:
            diagnostics["metric_error"] = metric_error
        if result.message:
            diagnostics["message"] = result.message
        return Evaluation(
            candidate=final,
            status=result.status,
            feedback=records,
            value=value,
            diagnostics=diagnostics,
            debug_iterations=result.debug_iterations_used,
            stderr=result.stderr_trace,
            runtime_seconds=result.runtime_seconds,
            intermediates=[c for c in produced if c.candidate_id != final.candidate_id],
        )
