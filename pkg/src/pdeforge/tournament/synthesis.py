"""Stage 3: selection and hybridization tournament.

Judges shortlist half of the pool and nominate one solver each. Every round
the nominees of all lanes are executed, the results are shown to every
judge, and each judge answers with a diff against its own lane's solver.
Rounds stop at the cycle's round cap or when the best-of-round value
saturates. A rejudging cycle then starts with fresh judge conversations over
the pool expanded by the cycle's hybrids.
"""

from __future__ import annotations

import json
import logging
import math
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

from ..genesis import SolverCandidate, load_candidate, save_candidate
from ..llm import Conversation, Gateway
from ..metrics import FeedbackRecord, FeedbackType
from ..prompts import DEFAULT_PROMPTS, PromptSet
from .judges import JudgeVerdict, VerdictError, parse_judge_verdict
from .patch import PatchError, apply_patch, extract_diff

log = logging.getLogger(__name__)

BASELINE_EVALUATIONS = 32


class SynthesisError(RuntimeError):
    pass


# --- evaluation interface ------------------------------------------------

@dataclass
class Evaluation:
    """What the tournament learns from executing one candidate.

    `candidate` is the program that was finally scored; it differs from the
    submitted one when the debug loop had to repair it. `intermediates` are
    the other debug-loop sources, kept for the record.
    """

    candidate: SolverCandidate
    status: str
    feedback: list[FeedbackRecord] = field(default_factory=list)
    value: float | None = None
    diagnostics: dict = field(default_factory=dict)
    debug_iterations: int = 0
    stderr: str = ""
    runtime_seconds: float = 0.0
    intermediates: list[SolverCandidate] = field(default_factory=list)


class Evaluator(Protocol):
    def __call__(self, candidate: SolverCandidate, purpose: str) -> Evaluation: ...


# --- configuration -------------------------------------------------------

def parse_schedule(text) -> tuple[int, ...]:
    """'4' -> (4,), '4+4' -> (4, 4): round caps per judging cycle."""
    if isinstance(text, int):
        parts = [text]
    elif isinstance(text, (list, tuple)):
        parts = list(text)
    else:
        parts = [p.strip() for p in str(text).split("+")]
    try:
        caps = tuple(int(p) for p in parts)
    except ValueError:
        raise SynthesisError(f"bad round schedule {text!r}") from None
    if not caps or any(c < 1 for c in caps):
        raise SynthesisError(f"bad round schedule {text!r}")
    return caps


@dataclass(frozen=True)
class TournamentConfig:
    judges: tuple[str, ...] = ("judge-model-a", "judge-model-b", "judge-model-c")
    max_rounds_per_cycle: int = 4
    max_cycles: int = 2
    schedule: tuple[int, ...] | None = None
    feedback: FeedbackType = field(default_factory=FeedbackType)
    saturation_rel_threshold: float = 0.01
    saturation_window: int = 2
    temperature: float = 0.7
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "judges", tuple(self.judges))
        object.__setattr__(self, "feedback", FeedbackType.from_value(self.feedback))
        if len(self.judges) < 2:
            raise SynthesisError("the tournament needs at least two judges")
        if self.schedule is not None:
            object.__setattr__(self, "schedule", parse_schedule(self.schedule))
        if self.max_rounds_per_cycle < 1 or self.max_cycles < 1:
            raise SynthesisError("round and cycle caps must be positive")
        if self.saturation_window < 1 or self.saturation_rel_threshold < 0:
            raise SynthesisError("bad saturation settings")

    @property
    def caps(self) -> tuple[int, ...]:
        return self.schedule or (self.max_rounds_per_cycle,) * self.max_cycles

    def to_dict(self) -> dict:
        return {
            "judges": list(self.judges),
            "rounds": list(self.caps),
            "feedback": self.feedback.to_dict(),
            "saturation_rel_threshold": self.saturation_rel_threshold,
            "saturation_window": self.saturation_window,
            "temperature": self.temperature,
        }


def judge_name(index: int) -> str:
    return chr(ord("A") + index) if index < 26 else f"J{index}"


# --- saturation ----------------------------------------------------------

def relative_improvement(prev: float, cur: float) -> float:
    if math.isinf(prev):
        return 0.0 if math.isinf(cur) else math.inf
    if prev == 0:
        return 0.0
    return (prev - cur) / abs(prev)


def detect_saturation(history, threshold: float = 0.01, window: int = 2) -> bool:
    """True iff each of the last `window` round-to-round relative improvements
    of the best-of-round value is below `threshold`. None entries (no
    numeric feedback) never saturate."""
    values = list(history)
    if len(values) < window + 1 or any(v is None for v in values[-(window + 1):]):
        return False
    tail = [float(v) for v in values[-(window + 1):]]
    return all(relative_improvement(a, b) < threshold for a, b in zip(tail, tail[1:]))


# --- state ---------------------------------------------------------------

@dataclass
class Lane:
    judge_id: str
    model_id: str
    current: str
    justification: str = ""


@dataclass
class ExecutionSummary:
    candidate_id: str
    submitted_id: str
    judge_id: str
    cycle: int
    round: int
    status: str
    value: float | None
    feedback: list[dict]
    diagnostics: dict
    debug_iterations: int
    stderr_tail: str

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class TournamentState:
    config: TournamentConfig
    initial_size: int
    candidates: dict[str, SolverCandidate]
    pool_ids: list[str]
    cycle: int = 1
    round: int = 0
    global_round: int = 0
    phase: str = "judging"  # judging -> rounds -> done
    lanes: list[Lane] = field(default_factory=list)
    conversations: dict[str, Conversation] = field(default_factory=dict)
    conversation_log: dict[int, dict[str, Conversation]] = field(default_factory=dict)
    verdicts: dict[int, list[JudgeVerdict]] = field(default_factory=dict)
    dropped_judges: list[dict] = field(default_factory=list)
    best_of_round: dict[int, list] = field(default_factory=dict)
    feedback_history: dict[int, dict[str, list[FeedbackRecord]]] = field(default_factory=dict)
    executions: list[ExecutionSummary] = field(default_factory=list)
    evaluations_used: int = 0
    rounds_completed: int = 0
    saturation: bool = False
    cycle_new_ids: list[str] = field(default_factory=list)

    @property
    def nominees(self) -> list[str]:
        return [lane.current for lane in self.lanes]

    @property
    def shortlist_size(self) -> int:
        return self.initial_size // 2

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "initial_size": self.initial_size,
            "candidate_ids": list(self.candidates),
            "pool_ids": list(self.pool_ids),
            "cycle": self.cycle,
            "round": self.round,
            "global_round": self.global_round,
            "phase": self.phase,
            "lanes": [lane.__dict__ for lane in self.lanes],
            "conversations": {j: c.to_dict() for j, c in self.conversations.items()},
            "verdicts": {str(k): [v.to_dict() | {"raw_response": v.raw_response} for v in vs]
                         for k, vs in self.verdicts.items()},
            "dropped_judges": self.dropped_judges,
            "best_of_round": {str(k): v for k, v in self.best_of_round.items()},
            "feedback_history": {str(k): {cid: [r.to_dict() for r in recs] for cid, recs in h.items()}
                                 for k, h in self.feedback_history.items()},
            "executions": [e.to_dict() for e in self.executions],
            "evaluations_used": self.evaluations_used,
            "rounds_completed": self.rounds_completed,
            "saturation": self.saturation,
            "cycle_new_ids": list(self.cycle_new_ids),
        }


def _state_from_dict(d: dict, config: TournamentConfig, candidates: dict[str, SolverCandidate]) -> TournamentState:
    st = TournamentState(config, d["initial_size"], candidates, list(d["pool_ids"]))
    st.cycle, st.round, st.global_round, st.phase = d["cycle"], d["round"], d["global_round"], d["phase"]
    st.lanes = [Lane(**lane) for lane in d["lanes"]]
    st.conversations = {j: Conversation.from_dict(c) for j, c in d["conversations"].items()}
    st.conversation_log[st.cycle] = dict(st.conversations)
    st.verdicts = {
        int(k): [JudgeVerdict(v["judge_id"], tuple(v["shortlist"]), tuple(v["reasons"]), v["nominee"],
                              v["confidence"], tuple(v["risks"]), v.get("raw_response", "")) for v in vs]
        for k, vs in d["verdicts"].items()
    }
    st.dropped_judges = d["dropped_judges"]
    st.best_of_round = {int(k): v for k, v in d["best_of_round"].items()}
    st.feedback_history = {int(k): {cid: [FeedbackRecord.from_dict(r) for r in recs] for cid, recs in h.items()}
                           for k, h in d["feedback_history"].items()}
    st.executions = [ExecutionSummary(**e) for e in d["executions"]]
    st.evaluations_used = d["evaluations_used"]
    st.rounds_completed = d["rounds_completed"]
    st.saturation = d["saturation"]
    st.cycle_new_ids = list(d["cycle_new_ids"])
    return st


# --- persistence ---------------------------------------------------------

def _dump(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False), encoding="utf-8")
    os.replace(tmp, path)


class TournamentStore:
    """tournament/round-<k>/ledger.json per round, tournament/state.json for
    resume, candidate sources under candidates/."""

    def __init__(self, tournament_dir, candidates_dir):
        self.root = Path(tournament_dir)
        self.candidates_dir = Path(candidates_dir)

    def save_candidate(self, cand: SolverCandidate) -> None:
        save_candidate(self.candidates_dir, cand)

    def save_round(self, k: int, ledger: dict, timings: dict, diffs: dict[str, str]) -> None:
        d = self.root / f"round-{k}"
        _dump(d / "ledger.json", ledger)
        _dump(d / "timings.json", timings)
        for judge_id, diff in diffs.items():
            (d / f"{judge_id}.diff").write_text(diff, encoding="utf-8")

    def save_cycle_verdicts(self, cycle: int, verdicts: list[JudgeVerdict], dropped: list[dict]) -> None:
        _dump(self.root / f"cycle-{cycle}" / "verdicts.json",
              {"verdicts": [v.to_dict() for v in verdicts], "dropped": dropped})

    def save_state(self, state: TournamentState) -> None:
        _dump(self.root / "state.json", state.to_dict())

    def load_state(self, config: TournamentConfig) -> TournamentState | None:
        p = self.root / "state.json"
        if not p.exists():
            return None
        d = json.loads(p.read_text())
        cands = {cid: load_candidate(self.candidates_dir, cid) for cid in d["candidate_ids"]}
        return _state_from_dict(d, config, cands)


# --- prompts -------------------------------------------------------------

def _objective(ft: FeedbackType) -> str:
    if ft.kind == "nrmse":
        return "most accurate results in nRMSE"
    if ft.kind == "residual":
        return "smallest discretized PDE residual"
    return "most accurate and robust results; no accuracy numbers will be shared, so rely on code analysis"


def _fmt_value(v) -> str:
    return "n/a" if v is None else f"{v:.6e}"


def describe_pool(state: TournamentState, ids) -> str:
    last = {e.candidate_id: e for e in state.executions}
    numeric = state.config.feedback.kind != "none"
    parts = []
    for cid in ids:
        c = state.candidates[cid]
        lines = [f"### Solver ID: {cid}", f"Strategy: {c.strategy}; origin: {c.origin}"]
        if c.parent_ids:
            lines.append(f"Derived from: {', '.join(c.parent_ids)}")
        if cid in last:
            e = last[cid]
            lines.append(f"Execution status: {e.status}")
            if numeric:
                lines.append(f"Feedback ({state.config.feedback.kind}): {_fmt_value(e.value)}")
        lines.append("Reasoning:")
        lines.append(c.reasoning or "(none given)")
        lines.append("Code:")
        lines.append(f"```python\n{c.source.rstrip()}\n```")
        parts.append("\n".join(lines))
    return "\n\n".join(parts)


def describe_results(state: TournamentState, round_execs: list[ExecutionSummary]) -> str:
    ft = state.config.feedback
    numeric = ft.kind != "none"
    out = []
    for lane, e in zip(state.lanes, round_execs):
        lines = [f"- Judge {lane.judge_id} lane, solver {e.candidate_id}: status {e.status}"]
        if numeric:
            for rec in e.feedback:
                lines.append(f"    {rec['metric_id']} = {rec['value']:.6e}")
        diag = e.diagnostics
        if "dt_max" in diag:
            lines.append(f"    reported dt_max = {diag['dt_max']:.2e}")
        if "internal_steps" in diag:
            lines.append(f"    internal steps = {diag['internal_steps']}")
        if e.debug_iterations:
            lines.append(f"    needed {e.debug_iterations} debugging iteration(s)")
        if e.status != "ok" and e.stderr_tail:
            lines.append("    error: " + e.stderr_tail.strip().splitlines()[-1])
        if lane.justification:
            lines.append(f"    justification: {lane.justification.strip()[:600]}")
        out.append("\n".join(lines))
    return "\n".join(out)


# --- steps ---------------------------------------------------------------

@dataclass
class Context:
    gateway: Gateway
    evaluator: Evaluator
    prompts: PromptSet
    pde_description: str
    store: TournamentStore | None


def initial_judgment(state: TournamentState, ctx: Context) -> list[JudgeVerdict]:
    """Fresh conversations for every judge; parse with one repair retry."""
    cfg = state.config
    k = state.shortlist_size
    pool_text = describe_pool(state, state.pool_ids)
    if state.cycle > 1:
        pool_text = (f"(Rejudging cycle {state.cycle}: the pool below includes the hybrids produced so far, "
                     f"with their justifications and feedback. Evaluate the expanded set from scratch.)\n\n"
                     + pool_text)
    conversations: dict[str, Conversation] = {}
    verdicts: list[JudgeVerdict] = []
    lanes: list[Lane] = []
    for i, model in enumerate(cfg.judges):
        jid = judge_name(i)
        prompt = ctx.prompts.render(
            "judge_initial",
            judge_name=jid,
            shortlist_size=k,
            pool_size=len(state.pool_ids),
            pde_description=ctx.pde_description,
            initial_solvers_plus_reasoning=pool_text,
            objective=_objective(cfg.feedback),
        ) + ctx.prompts.render("judge_block", shortlist_size=k)
        conv = Conversation(model, temperature=cfg.temperature)
        conv.add("user", prompt)
        purpose = f"judge.c{state.cycle}.{jid}"
        reply = ctx.gateway.ask(conv, f"{purpose}.verdict")
        try:
            verdict = parse_judge_verdict(jid, reply, state.pool_ids, k)
        except VerdictError as exc:
            conv.add("user", ctx.prompts.render("judge_repair", error=str(exc), shortlist_size=k))
            reply = ctx.gateway.ask(conv, f"{purpose}.verdict_repair")
            try:
                verdict = parse_judge_verdict(jid, reply, state.pool_ids, k)
            except VerdictError as exc2:
                log.warning("dropping judge %s in cycle %d: %s", jid, state.cycle, exc2)
                state.dropped_judges.append({"cycle": state.cycle, "judge_id": jid, "error": str(exc2)})
                continue
        conversations[jid] = conv
        verdicts.append(verdict)
        idx = verdict.shortlist.index(verdict.nominee)
        lanes.append(Lane(jid, model, verdict.nominee, verdict.reasons[idx]))
    if len(verdicts) < 2:
        raise SynthesisError(f"cycle {state.cycle}: only {len(verdicts)} usable judge verdicts")
    state.conversations = conversations
    state.conversation_log[state.cycle] = conversations
    state.verdicts[state.cycle] = verdicts
    state.lanes = lanes
    state.phase = "rounds"
    state.round = 0
    state.cycle_new_ids = []
    state.best_of_round[state.cycle] = []
    if ctx.store:
        ctx.store.save_cycle_verdicts(state.cycle, verdicts, [d for d in state.dropped_judges
                                                              if d["cycle"] == state.cycle])
    return verdicts


def _register(state: TournamentState, cand: SolverCandidate, ctx: Context) -> None:
    if cand.candidate_id in state.candidates:
        if state.candidates[cand.candidate_id].source != cand.source:
            raise SynthesisError(f"candidate id {cand.candidate_id} reused for a different program")
        return
    state.candidates[cand.candidate_id] = cand
    if cand.origin != "genesis":
        state.cycle_new_ids.append(cand.candidate_id)
    if ctx.store:
        ctx.store.save_candidate(cand)


def _propose(state: TournamentState, lane: Lane, results_text: str, ctx: Context) -> dict:
    conv = state.conversations[lane.judge_id]
    base = state.candidates[lane.current]
    conv.add("user", ctx.prompts.render("judge_round", round=state.round, round_results=results_text,
                                        base_id=base.candidate_id, base_source=base.source.rstrip("\n")))
    purpose = f"judge.c{state.cycle}.{lane.judge_id}.r{state.round}"
    reply = ctx.gateway.ask(conv, f"{purpose}.patch")
    record = {"judge_id": lane.judge_id, "base_candidate_id": base.candidate_id, "attempts": []}
    for attempt in range(2):
        try:
            diff = extract_diff(reply)
            new_source = apply_patch(base.source, diff)
        except PatchError as exc:
            record["attempts"].append({"error": str(exc)})
            if attempt == 0:
                conv.add("user", ctx.prompts.render("patch_repair", error=str(exc)))
                reply = ctx.gateway.ask(conv, f"{purpose}.patch_repair")
                continue
            record["outcome"] = "carried_forward"
            return record
        justification = _justification(reply)
        cid = f"c{state.cycle}r{state.round}{lane.judge_id}"
        cand = SolverCandidate(cid, new_source, base.strategy, "hybridization", (base.candidate_id,), diff,
                               lane.model_id, justification)
        _register(state, cand, ctx)
        lane.current = cid
        lane.justification = justification
        record.update(outcome="applied", candidate_id=cid, diff=diff, justification=justification)
        return record
    return record


def _justification(reply: str) -> str:
    return re.sub(r"```.*?```", "", reply, flags=re.DOTALL).strip()


def hybridization_round(state: TournamentState, ctx: Context) -> bool:
    """Execute every lane's solver, share results, collect and apply one diff
    per judge. Returns True when this round ends the cycle."""
    cfg = state.config
    if state.phase != "rounds":
        raise SynthesisError("no judged lanes to run")
    state.round += 1
    state.global_round += 1
    submitted = [lane.current for lane in state.lanes]

    def run(i):
        cand = state.candidates[submitted[i]]
        return ctx.evaluator(cand, f"c{state.cycle}.r{state.round}.{state.lanes[i].judge_id}")

    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            evals = list(pool.map(run, range(len(state.lanes))))
    else:
        evals = [run(i) for i in range(len(state.lanes))]
    state.evaluations_used += len(evals)

    round_execs = []
    fb_round: dict[str, list[FeedbackRecord]] = {}
    for lane, sub_id, ev in zip(state.lanes, submitted, evals):
        for extra in ev.intermediates:
            _register(state, extra, ctx)
        _register(state, ev.candidate, ctx)
        lane.current = ev.candidate.candidate_id
        value = ev.value if ev.status == "ok" else None
        summary = ExecutionSummary(
            ev.candidate.candidate_id, sub_id, lane.judge_id, state.cycle, state.round, ev.status, value,
            [r.to_dict() for r in ev.feedback], dict(ev.diagnostics), ev.debug_iterations, ev.stderr[-2000:],
        )
        state.executions.append(summary)
        round_execs.append(summary)
        if ev.status == "ok":
            fb_round[ev.candidate.candidate_id] = list(ev.feedback)
    state.feedback_history[state.global_round] = fb_round

    if cfg.feedback.kind == "none":
        best = None
    else:
        values = [e.value for e in round_execs if e.value is not None]
        best = min(values) if values else math.inf
    state.best_of_round[state.cycle].append(best)
    state.rounds_completed += 1
    cap = cfg.caps[state.cycle - 1]
    saturated = cfg.feedback.kind != "none" and detect_saturation(
        state.best_of_round[state.cycle], cfg.saturation_rel_threshold, cfg.saturation_window)
    state.saturation = saturated
    ends_cycle = saturated or state.round >= cap

    proposals = []
    results_text = describe_results(state, round_execs)
    if not ends_cycle:
        for lane in state.lanes:
            proposals.append(_propose(state, lane, results_text, ctx))

    if ctx.store:
        ledger = {
            "cycle": state.cycle,
            "round": state.round,
            "global_round": state.global_round,
            "feedback_type": cfg.feedback.to_dict(),
            "nominees": submitted,
            "executions": [e.to_dict() for e in round_execs],
            "best_of_round": best if best is None or math.isfinite(best) else None,
            "saturated": saturated,
            "ends_cycle": ends_cycle,
            "results_shared": results_text,
            "proposals": proposals,
        }
        timings = {ev.candidate.candidate_id: ev.runtime_seconds for ev in evals}
        diffs = {p["judge_id"]: p["diff"] for p in proposals if p.get("outcome") == "applied"}
        ctx.store.save_round(state.global_round, ledger, timings, diffs)
    return ends_cycle


def _next_cycle(state: TournamentState) -> None:
    state.pool_ids = state.pool_ids + [cid for cid in state.cycle_new_ids if cid not in state.pool_ids]
    state.cycle += 1
    state.phase = "judging"
    state.lanes = []
    state.conversations = {}
    state.saturation = False


def select_best(state: TournamentState) -> SolverCandidate:
    if state.config.feedback.kind == "none":
        # convention: the senior (first surviving) judge lane's last executed solver
        if not state.lanes:
            raise SynthesisError("no lanes ran")
        return state.candidates[state.lanes[0].current]
    best = None
    for e in state.executions:
        if e.value is not None and (best is None or e.value < best.value):
            best = e
    if best is None:
        raise SynthesisError("no candidate executed successfully")
    return state.candidates[best.candidate_id]


@dataclass
class SynthesisResult:
    best: SolverCandidate
    state: TournamentState
    evaluations_used: int

    @property
    def reduction_vs_baseline(self) -> float:
        return 1.0 - self.evaluations_used / BASELINE_EVALUATIONS


def run_synthesis(
    pool: list[SolverCandidate],
    config: TournamentConfig,
    gateway: Gateway,
    evaluator: Evaluator,
    pde_description: str,
    prompts: PromptSet = DEFAULT_PROMPTS,
    store: TournamentStore | None = None,
    on_round: Callable[[TournamentState], None] | None = None,
) -> SynthesisResult:
    n = len(pool)
    if n < 2 or n % 2:
        raise SynthesisError(f"pool size must be even and at least 2, got {n}")
    ids = [c.candidate_id for c in pool]
    if len(set(ids)) != n:
        raise SynthesisError("duplicate candidate ids in the pool")
    prompts.require(["judge_initial", "judge_block", "judge_repair", "judge_round", "patch_repair"])
    ctx = Context(gateway, evaluator, prompts, pde_description, store)
    state = store.load_state(config) if store else None
    if state is None:
        state = TournamentState(config, n, {c.candidate_id: c for c in pool}, ids)
        if store:
            for c in pool:
                store.save_candidate(c)
    while state.phase != "done":
        if state.phase == "judging":
            initial_judgment(state, ctx)
        else:
            if hybridization_round(state, ctx):
                if state.cycle < len(config.caps):
                    _next_cycle(state)
                else:
                    state.phase = "done"
            if on_round:
                on_round(state)
        if store:
            store.save_state(state)
    return SynthesisResult(select_best(state), state, state.evaluations_used)
