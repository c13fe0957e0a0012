"""LLM-driven repair of failing candidates."""

from __future__ import annotations

from dataclasses import replace
from typing import Callable

from ..genesis import ExtractionError, SolverCandidate, extract_code
from ..llm import Conversation, Gateway
from ..prompts import DEFAULT_PROMPTS, PromptSet
from .runner import ExecutionLimits, ExecutionResult

STDERR_TAIL = 4000


def debug_loop(
    candidate: SolverCandidate,
    failure: ExecutionResult,
    gateway: Gateway,
    model_id: str,
    limits: ExecutionLimits,
    rerun: Callable[[SolverCandidate], ExecutionResult],
    prompts: PromptSet = DEFAULT_PROMPTS,
    purpose: str | None = None,
) -> tuple[SolverCandidate, ExecutionResult, list[SolverCandidate]]:
    """Ask for a corrected program and re-run, up to the debug cap.

    Returns the last candidate tried, its result, and every corrected source
    produced along the way. Never raises on exhaustion.
    """
    if failure.ok:
        raise ValueError("debug_loop needs a failed execution")
    purpose = purpose or f"debug.{candidate.candidate_id}"
    current, result = candidate, failure
    produced: list[SolverCandidate] = []
    conv = None
    for k in range(1, limits.max_debug_iterations + 1):
        evidence = (result.stderr_trace or result.message)[-STDERR_TAIL:]
        if result.message and result.message not in evidence:
            evidence = f"{evidence}\n{result.message}".strip()
        prompt = prompts.render("debug", status=result.status, stderr=evidence.rstrip(),
                                source=current.source.rstrip("\n"))
        if conv is None:
            conv = Conversation(model_id, temperature=0.2)
        conv.add("user", prompt)
        reply = gateway.ask(conv, f"{purpose}.{k}")
        try:
            code = extract_code(reply)
        except ExtractionError as exc:
            result = replace(result, message=f"debug reply {k} had no code: {exc}", debug_iterations_used=k)
            continue
        current = SolverCandidate(
            f"{candidate.candidate_id}.d{k}", code, candidate.strategy, "debug_fix", (current.candidate_id,),
            None, model_id, f"debug fix {k} of {candidate.candidate_id}",
        )
        produced.append(current)
        result = rerun(current)
        result.debug_iterations_used = k
        if result.ok:
            break
    return current, result, produced
