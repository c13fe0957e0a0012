"""Stage orchestration over one run directory.

Layout (fixed names):

    manifest.json          config snapshot, stage outcomes, content hashes
    reference/             inputs.pdet, solutions.pdet, manifest.json
    analysis/report.json
    candidates/            <id>.py + <id>.json, pool.json
    tournament/            state.json, cycle-<c>/verdicts.json, round-<k>/
    transcripts/           one JSON file per model call
    usage/<stage>.json     token usage records
    executions/            per-execution working directories
    report.md, costs.json

Each stage is all-or-nothing: its outcome is written to the manifest only
after it completes, and a rerun skips stages already marked done (after
verifying their hashes). Synthesis also persists state after every round, so
an interrupted tournament resumes from the last completed round.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from pathlib import Path

from .analysis import AnalysisReport, run_analysis
from .config import RunConfig
from .domain import make_grid
from .genesis import generate_candidates, load_candidate, load_pool, save_pool
from .harness import DEFAULT_COMMAND, ExecutionLimits, HarnessEvaluator
from .llm import (
    Gateway,
    HttpBackend,
    PriceTable,
    ScriptedBackend,
    TranscriptStore,
    UsageRecord,
)
from .prompts import PromptSet
from .reference import BundleError, ReferenceConfig, generate_reference_set, load_bundle
from .report import write_costs, write_report
from .tournament import TournamentConfig, TournamentStore, run_synthesis

log = logging.getLogger(__name__)

STAGES = ("reference", "analysis", "genesis", "synthesis", "report")
EXIT_CODES = {"config": 2, "reference": 10, "analysis": 11, "genesis": 12, "synthesis": 13, "report": 14,
              "evaluate": 15}


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage} stage failed: {message}")
        self.stage = stage
        self.exit_code = EXIT_CODES[stage]


def sha256_path(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _dump(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def make_backend(config: RunConfig, transcripts_dir: Path):
    b = config["backend"]
    mode = b["mode"]
    inner = None
    if mode != "replay":
        if b["kind"] == "scripted":
            from .demo import demo_responder

            inner = ScriptedBackend(demo_responder)
        else:
            inner = HttpBackend(b["base_url"], b["credential_env"], attempts=b["attempts"])
    directory = Path(b["transcripts"]) if b.get("transcripts") else transcripts_dir
    return TranscriptStore(directory, mode, inner)


class Run:
    def __init__(self, run_dir, config: RunConfig, backend=None):
        self.dir = Path(run_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.config = config
        self.task = config.task
        g = config["grid"]
        if self.task.time_dependent:
            self.grid = make_grid(self.task, g["N"], g["T"], g.get("t_end"))
        else:
            self.grid = make_grid(self.task, g["N"])
        self.prompts = PromptSet(config["prompts_dir"])
        self._backend = backend
        self.manifest = self._load_manifest()

    # --- manifest ---------------------------------------------------------

    @property
    def manifest_path(self) -> Path:
        return self.dir / "manifest.json"

    def _load_manifest(self) -> dict:
        if self.manifest_path.exists():
            m = json.loads(self.manifest_path.read_text())
            if m.get("config") != self.config.snapshot():
                raise StageError("config", f"{self.dir} holds a run with a different configuration")
            return m
        return {"config": self.config.snapshot(), "stages": {}, "hashes": {}}

    def save_manifest(self) -> None:
        _dump(self.manifest_path, self.manifest)

    def done(self, stage: str) -> bool:
        return self.manifest["stages"].get(stage, {}).get("status") == "done"

    def _hash(self, rel: str) -> None:
        self.manifest["hashes"][rel] = sha256_path(self.dir / rel)

    def verify(self) -> list[str]:
        """Paths whose content no longer matches the recorded hash."""
        bad = []
        for rel, digest in sorted(self.manifest["hashes"].items()):
            p = self.dir / rel
            if not p.exists() or sha256_path(p) != digest:
                bad.append(rel)
        return bad

    def _complete(self, stage: str, **outcome) -> None:
        self.manifest["stages"][stage] = {"status": "done", **outcome}
        self.save_manifest()

    # --- llm plumbing -----------------------------------------------------

    @property
    def backend(self):
        if self._backend is None:
            self._backend = make_backend(self.config, self.dir / "transcripts")
        return self._backend

    def _save_usage(self, stage: str, records: list[UsageRecord]) -> None:
        _dump(self.dir / "usage" / f"{stage}.json", [r.to_dict() for r in records])

    def _load_usage(self, stage: str) -> list[UsageRecord]:
        p = self.dir / "usage" / f"{stage}.json"
        return [UsageRecord.from_dict(d) for d in json.loads(p.read_text())] if p.exists() else []

    @property
    def generator(self) -> str:
        return self.config["models"]["generator"]

    @property
    def temperature(self) -> float:
        return float(self.config["tournament"]["temperature"])

    # --- stages -----------------------------------------------------------

    def reference(self):
        stage = "reference"
        rcfg = self.config["reference"]
        given = rcfg.get("bundle")
        if self.done(stage) or given:
            path = Path(given) if given else self.dir / "reference"
            try:
                bundle = load_bundle(path)
            except (BundleError, OSError) as exc:
                raise StageError(stage, str(exc)) from exc
            if bundle.task.task_id != self.task.task_id:
                raise StageError(stage, f"bundle at {path} is for {bundle.task.task_id}")
            if not self.done(stage):
                self._complete(stage, bundle=str(path))
            return bundle
        cfg = ReferenceConfig(oversample_factor=rcfg.get("oversample_factor"),
                              safety_fraction=rcfg.get("safety_fraction", 1.0), scheme=rcfg.get("scheme"))
        try:
            bundle = generate_reference_set(self.task, self.grid, self.config["batch"], self.config["seed"], cfg,
                                            self.dir / "reference")
        except Exception as exc:
            raise StageError(stage, str(exc)) from exc
        for name in ("inputs.pdet", "solutions.pdet", "manifest.json"):
            self._hash(f"reference/{name}")
        self._complete(stage, bundle="reference")
        return bundle

    def analysis(self) -> AnalysisReport:
        stage = "analysis"
        path = self.dir / "analysis" / "report.json"
        if self.done(stage):
            return AnalysisReport.from_json(path.read_text())
        prior = self.config["prior_report"]
        prior_text = Path(prior).read_text() if prior else None
        gateway = Gateway(self.backend)
        try:
            report = run_analysis(self.task, gateway, self.generator, self.prompts, prior_text, self.temperature)
        except Exception as exc:
            self._save_usage(stage, gateway.ledger)
            raise StageError(stage, str(exc)) from exc
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(report.to_json() + "\n", encoding="utf-8")
        self._save_usage(stage, gateway.ledger)
        self._hash("analysis/report.json")
        self._complete(stage, report="analysis/report.json", route=report.route)
        return report

    def genesis(self, report: AnalysisReport):
        stage = "genesis"
        cdir = self.dir / "candidates"
        if self.done(stage):
            return load_pool(cdir)
        gateway = Gateway(self.backend)
        try:
            outcome = generate_candidates(report, self.task, self.config["n_candidates"], gateway, self.generator,
                                          self.prompts, self.temperature, self.config["workers"])
        except Exception as exc:
            self._save_usage(stage, gateway.ledger)
            raise StageError(stage, str(exc)) from exc
        save_pool(cdir, outcome)
        self._save_usage(stage, gateway.ledger)
        self._hash("candidates/pool.json")
        for c in outcome.candidates:
            self._hash(f"candidates/{c.candidate_id}.py")
        self._complete(stage, pool="candidates/pool.json", size=len(outcome.candidates),
                       dropped=len(outcome.dropped))
        return outcome.candidates

    def limits(self) -> ExecutionLimits:
        lim = self.config["limits"]
        return ExecutionLimits(float(lim["wall_clock_seconds"]), int(lim["memory_bytes"]),
                               int(lim["max_debug_iterations"]))

    def guest_command(self):
        cmd = self.config["guest_command"]
        return tuple(cmd) if cmd else DEFAULT_COMMAND

    def tournament_config(self) -> TournamentConfig:
        t = self.config["tournament"]
        return TournamentConfig(
            judges=tuple(self.config["models"]["judges"]),
            schedule=self.config.schedule,
            feedback=self.config.feedback,
            saturation_rel_threshold=float(t["saturation_rel_threshold"]),
            saturation_window=int(t["saturation_window"]),
            temperature=self.temperature,
            workers=int(self.config["workers"]),
        )

    def synthesis(self, pool, bundle):
        stage = "synthesis"
        if self.done(stage):
            return self.manifest["stages"][stage]
        tcfg = self.tournament_config()
        earlier = self._load_usage(stage)
        gateway = Gateway(self.backend)
        evaluator = HarnessEvaluator(
            self.task, self.grid, bundle.inputs.data, tcfg.feedback,
            reference=bundle.solutions.data if tcfg.feedback.requires_reference else None,
            limits=self.limits(), gateway=gateway, model_id=self.generator, prompts=self.prompts,
            exec_root=self.dir / "executions", guest_command=self.guest_command(),
        )
        store = TournamentStore(self.dir / "tournament", self.dir / "candidates")

        def checkpoint(state):
            self._save_usage(stage, earlier + gateway.ledger)

        try:
            result = run_synthesis(pool, tcfg, gateway, evaluator, self.prompts.describe(self.task), self.prompts,
                                   store, on_round=checkpoint)
        except Exception as exc:
            self._save_usage(stage, earlier + gateway.ledger)
            raise StageError(stage, str(exc)) from exc
        self._save_usage(stage, earlier + gateway.ledger)
        state = result.state
        for cid in sorted(state.candidates):
            rel = f"candidates/{cid}.py"
            if (self.dir / rel).exists():
                self._hash(rel)
        rounds = sorted((self.dir / "tournament").glob("round-*/ledger.json"))
        for p in rounds:
            self._hash(str(p.relative_to(self.dir)))
        best_value = min((e.value for e in state.executions if e.candidate_id == result.best.candidate_id
                          and e.value is not None), default=None)
        outcome = {
            "best_candidate_id": result.best.candidate_id,
            "best_value": best_value,
            "evaluations_used": result.evaluations_used,
            "rounds_completed": state.rounds_completed,
            "cycles": state.cycle,
            "reduction_vs_baseline": result.reduction_vs_baseline,
            "tournament": "tournament",
        }
        self._complete(stage, **outcome)
        return self.manifest["stages"][stage]

    def report(self):
        stage = "report"
        try:
            write_report(self.dir)
            costs = write_costs(self.dir, self.prices())
        except Exception as exc:
            raise StageError(stage, str(exc)) from exc
        self.manifest["cost_summary"] = costs["total"]
        self._hash("report.md")
        self._hash("costs.json")
        self._complete(stage, report="report.md", costs="costs.json")

    def prices(self) -> PriceTable:
        p = self.config["prices"]
        return PriceTable({k: tuple(v) for k, v in (p.get("prices") or {}).items()},
                          default=tuple(p["default"]) if p.get("default") else None)

    def check_integrity(self) -> None:
        bad = self.verify()
        if bad:
            raise StageError("config", "run directory was modified after it was written: " + ", ".join(bad))

    def run(self, until: str = "report") -> dict:
        """Run every stage up to and including `until`, skipping finished ones."""
        if until not in STAGES:
            raise ValueError(f"unknown stage {until!r}")
        self.check_integrity()
        self.save_manifest()
        log.info("run directory %s", self.dir)
        bundle = self.reference()
        if until == "reference":
            return self.manifest
        report = self.analysis()
        if until == "analysis":
            return self.manifest
        pool = self.genesis(report)
        if until == "genesis":
            return self.manifest
        self.synthesis(pool, bundle)
        if until == "synthesis":
            return self.manifest
        self.report()
        return self.manifest


def run_pipeline(config: RunConfig, run_dir, backend=None) -> dict:
    return Run(run_dir, config, backend).run()


def evaluate_program(source_path, bundle_path, feedback="nrmse", limits: ExecutionLimits = ExecutionLimits(),
                     guest_command=DEFAULT_COMMAND, workdir=None) -> dict:
    """Score one guest program against a reference bundle, without any model calls."""
    from .genesis import SolverCandidate
    from .metrics import FeedbackType

    bundle = load_bundle(bundle_path)
    ft = FeedbackType.from_value(feedback)
    cand = SolverCandidate(Path(source_path).stem, Path(source_path).read_text(encoding="utf-8"), "numerical",
                           "genesis")
    ev = HarnessEvaluator(bundle.task, bundle.grid, bundle.inputs.data, ft,
                          reference=bundle.solutions.data if ft.requires_reference else None,
                          limits=limits, exec_root=workdir, guest_command=guest_command)
    result = ev.run(cand)
    records, value, metric_error = ev.score(result)
    return {
        "candidate": cand.candidate_id,
        "status": result.status,
        "value": value,
        "feedback": [r.to_dict() for r in records],
        "diagnostics": result.diagnostics,
        "message": metric_error or result.message,
        "stderr_tail": result.stderr_trace[-2000:],
    }


def load_run_candidate(run_dir, candidate_id: str):
    return load_candidate(Path(run_dir) / "candidates", candidate_id)

