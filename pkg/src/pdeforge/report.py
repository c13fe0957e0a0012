"""Tournament-evolution reports and cost summaries built from a run directory."""

from __future__ import annotations

import json
import math
import re
from pathlib import Path

from .llm import DEFAULT_PRICES, PriceTable, UsageRecord, cost_total
from .tournament.synthesis import BASELINE_EVALUATIONS

PURPOSES = ("analysis", "genesis", "judge", "debug")


class ReportError(RuntimeError):
    pass


def format_factor(factor: float) -> str:
    """Factors of 10 or more are truncated to an integer, smaller ones keep
    two decimals without trailing zeros: 77.54 -> '77×', 1.0 -> '1×'."""
    if not math.isfinite(factor):
        return "∞×"
    if factor >= 10:
        return f"{math.floor(factor)}×"
    text = f"{math.floor(factor * 100) / 100:.2f}".rstrip("0").rstrip(".")
    return f"{text}×"


def improvement_factor(first_round_best: float, final_best: float) -> float:
    if final_best == 0:
        return math.inf if first_round_best > 0 else 1.0
    return first_round_best / final_best


def load_round_ledgers(run_dir) -> list[dict]:
    tdir = Path(run_dir) / "tournament"
    rounds = []
    for d in tdir.glob("round-*"):
        m = re.fullmatch(r"round-(\d+)", d.name)
        if m and (d / "ledger.json").exists():
            rounds.append((int(m.group(1)), json.loads((d / "ledger.json").read_text())))
    if not rounds:
        raise ReportError(f"no tournament ledger under {tdir}")
    return [r for _, r in sorted(rounds)]


def _sci(v) -> str:
    return "n/a" if v is None else f"{v:.6f}" if v >= 1e-3 else f"{v:.3e}"


def _diff_stats(diff: str) -> tuple[int, int]:
    plus = sum(1 for ln in diff.splitlines() if ln.startswith("+") and not ln.startswith("+++"))
    minus = sum(1 for ln in diff.splitlines() if ln.startswith("-") and not ln.startswith("---"))
    return plus, minus


def _first_line(text: str) -> str:
    for ln in (text or "").splitlines():
        if ln.strip():
            return ln.strip()
    return ""


def build_report(ledgers: list[dict], manifest: dict | None = None) -> str:
    manifest = manifest or {}
    feedback = ledgers[0].get("feedback_type", {}).get("kind", "nrmse")
    numeric = feedback != "none"
    metric_name = {"nrmse": "nRMSE", "residual": "residual"}.get(feedback, "metric")
    evaluations = sum(len(r["executions"]) for r in ledgers)

    lines = ["# Solver evolution report", ""]
    lines.append("## Executive summary")
    lines.append("")
    task = manifest.get("config", {}).get("task", {}).get("id")
    if task:
        lines.append(f"- Task: {task}")
    lines.append(f"- Feedback: {feedback}")
    cycles = sorted({r["cycle"] for r in ledgers})
    lines.append(f"- Rounds: {len(ledgers)} across {len(cycles)} judging cycle(s)")
    reduction = 100.0 * (1 - evaluations / BASELINE_EVALUATIONS)
    lines.append(f"- Solver evaluations: {evaluations} (vs {BASELINE_EVALUATIONS} for sample-and-execute, "
                 f"{reduction:.1f}% fewer)")
    best_id = manifest.get("stages", {}).get("synthesis", {}).get("best_candidate_id")
    if numeric:
        execs = [e for r in ledgers for e in r["executions"] if e["value"] is not None]
        if execs:
            best = min(execs, key=lambda e: e["value"])
            first = [e["value"] for e in ledgers[0]["executions"] if e["value"] is not None]
            best_id = best_id or best["candidate_id"]
            lines.append(f"- Best solver: {best_id} with {metric_name} {_sci(best['value'])}")
            if first:
                factor = improvement_factor(min(first), best["value"])
                lines.append(f"- Improvement over the round-1 best ({_sci(min(first))}): "
                             f"{format_factor(factor)} error reduction")
        else:
            lines.append("- No solver executed successfully")
    elif best_id:
        lines.append(f"- Selected solver: {best_id} (no accuracy feedback; senior judge lane)")
    lines.append("")

    for r in ledgers:
        lines.append(f"## Round {r['global_round']} (cycle {r['cycle']}, round {r['round']})")
        lines.append("")
        head = "| Judge | Solver | Status |" + (f" {metric_name} |" if numeric else "") + \
               " dt_max | Internal steps | Debug iterations |"
        lines.append(head)
        lines.append("|" + "---|" * (head.count("|") - 1))
        for e in r["executions"]:
            d = e["diagnostics"]
            dt = f"{d['dt_max']:.2e}" if "dt_max" in d else "-"
            steps = str(d.get("internal_steps", "-"))
            row = f"| {e['judge_id']} | {e['candidate_id']} | {e['status']} |"
            if numeric:
                row += f" {_sci(e['value'])} |"
            row += f" {dt} | {steps} | {e['debug_iterations']} |"
            lines.append(row)
        lines.append("")
        if numeric and r.get("best_of_round") is not None:
            lines.append(f"Best of round: {_sci(r['best_of_round'])}" +
                         (" (saturated)" if r.get("saturated") else ""))
            lines.append("")
        for p in r.get("proposals", []):
            if p.get("outcome") == "applied":
                plus, minus = _diff_stats(p["diff"])
                lines.append(f"- Judge {p['judge_id']}: {p['base_candidate_id']} -> {p['candidate_id']} "
                             f"(+{plus}/-{minus} lines). {_first_line(p.get('justification', ''))}")
            else:
                lines.append(f"- Judge {p['judge_id']}: patch for {p['base_candidate_id']} could not be applied; "
                             f"lane carries its solver forward")
        if r.get("proposals"):
            lines.append("")

    lines.append("## Comparative results")
    lines.append("")
    if numeric:
        lines.append(f"| Round | Best {metric_name} | Solver |")
        lines.append("|---|---|---|")
        for r in ledgers:
            ok = [e for e in r["executions"] if e["value"] is not None]
            if ok:
                b = min(ok, key=lambda e: e["value"])
                lines.append(f"| {r['global_round']} | {_sci(b['value'])} | {b['candidate_id']} |")
            else:
                lines.append(f"| {r['global_round']} | n/a | - |")
    else:
        lines.append("| Round | Solvers | Statuses |")
        lines.append("|---|---|---|")
        for r in ledgers:
            ids = ", ".join(e["candidate_id"] for e in r["executions"])
            st = ", ".join(e["status"] for e in r["executions"])
            lines.append(f"| {r['global_round']} | {ids} | {st} |")
    lines.append("")
    lines.append("## Key findings")
    lines.append("")
    lines.append("- _Stability:_ (to be filled in)")
    lines.append("- _Accuracy:_ (to be filled in)")
    lines.append("- _Efficiency:_ (to be filled in)")
    lines.append("")
    return "\n".join(lines)


def write_report(run_dir, narrative: str | None = None) -> str:
    run_dir = Path(run_dir)
    ledgers = load_round_ledgers(run_dir)
    mpath = run_dir / "manifest.json"
    manifest = json.loads(mpath.read_text()) if mpath.exists() else {}
    text = build_report(ledgers, manifest)
    if narrative:
        text += "\n## Narrative (model-written, not derived from the ledgers)\n\n" + narrative.strip() + "\n"
    (run_dir / "report.md").write_text(text, encoding="utf-8")
    return text


# --- costs -----------------------------------------------------------------

def load_usage(run_dir) -> list[UsageRecord]:
    udir = Path(run_dir) / "usage"
    records = []
    for p in sorted(udir.glob("*.json")) if udir.exists() else []:
        records += [UsageRecord.from_dict(d) for d in json.loads(p.read_text())]
    return records


def purpose_category(purpose: str) -> str:
    head = purpose.split(".", 1)[0]
    return head if head in PURPOSES else "other"


def cost_summary(run_dir=None, prices: PriceTable = DEFAULT_PRICES, records=None) -> dict:
    """Per-purpose costs; the total is the sum of the purpose rows."""
    records = load_usage(run_dir) if records is None else list(records)
    by = {}
    for cat in PURPOSES + ("other",):
        subset = [r for r in records if purpose_category(r.purpose) == cat]
        if subset or cat != "other":
            by[cat] = cost_total(subset, prices)
    total = {k: 0 for k in ("input_tokens", "output_tokens")}
    total.update(input_cost=0.0, output_cost=0.0, total=0.0)
    for row in by.values():
        for k in total:
            total[k] += row[k]
    return {"by_purpose": by, "total": total, "calls": len(records)}


def write_costs(run_dir, prices: PriceTable = DEFAULT_PRICES) -> dict:
    summary = cost_summary(run_dir, prices)
    (Path(run_dir) / "costs.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    return summary


def format_costs(summary: dict) -> str:
    rows = ["| Purpose | Input tokens | Output tokens | Input $ | Output $ | Total $ |", "|---|---|---|---|---|---|"]
    for cat, r in list(summary["by_purpose"].items()) + [("total", summary["total"])]:
        rows.append(f"| {cat} | {r['input_tokens']} | {r['output_tokens']} | {r['input_cost']:.4f} | "
                    f"{r['output_cost']:.4f} | {r['total']:.4f} |")
    return "\n".join(rows)
