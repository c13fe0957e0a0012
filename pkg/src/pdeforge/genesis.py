"""Stage 2: generate the initial pool of solver candidates."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .analysis import ROUTES, AnalysisReport, fenced_blocks
from .domain import PdeTask
from .llm import Conversation, Gateway
from .prompts import DEFAULT_PROMPTS, GENESIS_ASSETS, PromptSet

log = logging.getLogger(__name__)

ORIGINS = ("genesis", "hybridization", "debug_fix")


class GenesisError(RuntimeError):
    pass


class ExtractionError(ValueError):
    pass


@dataclass(frozen=True)
class SolverCandidate:
    candidate_id: str
    source: str
    strategy: str
    origin: str
    parent_ids: tuple[str, ...] = ()
    patch: str | None = None
    generator_model: str = ""
    reasoning: str = ""

    def __post_init__(self):
        object.__setattr__(self, "parent_ids", tuple(self.parent_ids))
        if not self.source.strip():
            raise ValueError(f"{self.candidate_id}: empty source")
        if self.strategy not in ROUTES:
            raise ValueError(f"{self.candidate_id}: unknown strategy {self.strategy!r}")
        if self.origin not in ORIGINS:
            raise ValueError(f"{self.candidate_id}: unknown origin {self.origin!r}")
        if self.origin == "genesis" and self.parent_ids:
            raise ValueError(f"{self.candidate_id}: genesis candidates have no parents")
        if self.origin == "hybridization" and (self.patch is None or len(self.parent_ids) != 1):
            raise ValueError(f"{self.candidate_id}: hybrids need a patch and exactly one parent")

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.source.encode("utf-8")).hexdigest()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["parent_ids"] = list(self.parent_ids)
        return d

    @classmethod
    def from_dict(cls, d) -> "SolverCandidate":
        return cls(**{**d, "parent_ids": tuple(d.get("parent_ids", ()))})


def extract_code(text: str, warnings: list[str] | None = None) -> str:
    """Contents of the fenced code block; the longest one if there are several."""
    blocks = [body for _, body in fenced_blocks(text)]
    if not blocks:
        raise ExtractionError("no fenced code block in the response")
    if len(blocks) > 1:
        msg = f"response has {len(blocks)} code blocks, keeping the longest"
        log.warning(msg)
        if warnings is not None:
            warnings.append(msg)
    return max(blocks, key=lambda b: (len(b.splitlines()), len(b)))


def strip_code(text: str) -> str:
    """The prose around the code, kept as the candidate's reasoning."""
    return re.sub(r"```.*?```", "[code]", text, flags=re.DOTALL).strip()


def genesis_id(index: int) -> str:
    return f"g{index:03d}"


def genesis_prompt(report: AnalysisReport, task: PdeTask, prompts: PromptSet, index: int, n: int) -> str:
    name = GENESIS_ASSETS[report.route]
    values = {
        "pde_description": prompts.describe(task),
        "solver_template": prompts.solver_template(task),
        "code_generation_criteria": prompts.criteria(),
    }
    if report.route in ("hybrid", "numerical"):
        values["stability_plan"] = report.stability.as_prompt_text() if report.stability else "(none)"
    body = prompts.render(name, **values)
    if n > 1:
        body += prompts.render("genesis_variant", index=index + 1, total=n)
    return body


@dataclass
class GenesisOutcome:
    candidates: list[SolverCandidate]
    dropped: list[dict] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


def _conversation(report: AnalysisReport, model_id: str, prompt: str, temperature: float) -> Conversation:
    conv = Conversation(model_id, temperature=temperature)
    for role, content in report.messages:
        conv.add(role, content)
    conv.add("user", prompt)
    return conv


def generate_candidates(
    report: AnalysisReport,
    task: PdeTask,
    n: int,
    gateway: Gateway,
    model_id: str,
    prompts: PromptSet = DEFAULT_PROMPTS,
    temperature: float = 0.7,
    workers: int = 1,
) -> GenesisOutcome:
    if n < 2 or n % 2:
        raise GenesisError(f"pool size must be even and at least 2, got {n}")
    prompts.require([GENESIS_ASSETS[report.route], "code_generation_criteria"])

    def one(index: int):
        cid = genesis_id(index)
        conv = _conversation(report, model_id, genesis_prompt(report, task, prompts, index, n), temperature)
        warnings: list[str] = []
        reply = gateway.ask(conv, f"genesis.{cid}")
        try:
            code = extract_code(reply, warnings)
        except ExtractionError:
            conv.add("user", "Your answer contained no code block. Reply with the complete solver program in ONE "
                             "```python ... ``` block.")
            reply = gateway.ask(conv, f"genesis.{cid}.retry")
            try:
                code = extract_code(reply, warnings)
            except ExtractionError as exc:
                return cid, None, str(exc), warnings
        cand = SolverCandidate(cid, code, report.route, "genesis", generator_model=model_id,
                               reasoning=strip_code(reply))
        return cid, cand, None, warnings

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, range(n)))
    else:
        results = [one(i) for i in range(n)]

    out = GenesisOutcome([])
    for cid, cand, err, warnings in results:
        out.warnings += [f"{cid}: {w}" for w in warnings]
        if cand is None:
            out.dropped.append({"candidate_id": cid, "error": err})
        else:
            out.candidates.append(cand)
    if len(out.candidates) < n // 2:
        raise GenesisError(f"only {len(out.candidates)} of {n} candidates could be extracted")
    return out


# --- persistence -----------------------------------------------------------

def _write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def save_candidate(directory, cand: SolverCandidate) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    _write(d / f"{cand.candidate_id}.py", cand.source)
    meta = cand.to_dict()
    meta.pop("source")
    meta["sha256"] = cand.sha256
    _write(d / f"{cand.candidate_id}.json", json.dumps(meta, indent=2, sort_keys=True))


def load_candidate(directory, candidate_id: str) -> SolverCandidate:
    d = Path(directory)
    meta = json.loads((d / f"{candidate_id}.json").read_text())
    source = (d / f"{candidate_id}.py").read_text(encoding="utf-8")
    digest = meta.pop("sha256")
    cand = SolverCandidate.from_dict({**meta, "source": source})
    if cand.sha256 != digest:
        raise GenesisError(f"candidate {candidate_id} source does not match its recorded hash")
    return cand


def save_pool(directory, outcome: GenesisOutcome) -> Path:
    d = Path(directory)
    for c in outcome.candidates:
        save_candidate(d, c)
    manifest = {
        "candidates": [
            {"candidate_id": c.candidate_id, "strategy": c.strategy, "origin": c.origin,
             "parent_ids": list(c.parent_ids), "sha256": c.sha256}
            for c in outcome.candidates
        ],
        "dropped": outcome.dropped,
        "warnings": outcome.warnings,
    }
    path = d / "pool.json"
    _write(path, json.dumps(manifest, indent=2, sort_keys=True))
    return path


def load_pool(directory) -> list[SolverCandidate]:
    d = Path(directory)
    manifest = json.loads((d / "pool.json").read_text())
    return [load_candidate(d, e["candidate_id"]) for e in manifest["candidates"]]
