"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Everything runs offline with the scripted or replay backend. Tolerances and
runtime budgets are the ones the criteria state.
"""

import json
import logging
import math
import random
import time

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from invariant_cases import all_cases
from ledger_fixtures import four_round_ledgers, write_run
from pdeforge.cli import main
from pdeforge.domain import make_grid, registry_get, sample_initial_conditions
from pdeforge.genesis import SolverCandidate
from pdeforge.harness import ExecutionLimits, execute
from pdeforge.llm import DEFAULT_PRICES, PriceTable, UsageRecord, cost_total
from pdeforge.metrics import CATALOG, convergence_order, darcy_residual, nrmse
from pdeforge.metrics.invariants import total_variation
from pdeforge.programs import NAMES, program_source
from pdeforge.prompts import DEFAULT_PROMPTS
from pdeforge.reference import (
    ReferenceConfig,
    darcy_boundary_trace,
    dt_max_diffusion,
    reaction_exact_step,
    reaction_naive_step,
    solve_reference,
)
from pdeforge.reference.solvers import advection_exact, reaction_diffusion_reference
from pdeforge.report import write_report
from pdeforge.tournament.patch import ContextMismatchError, OverlappingHunksError, apply_patch, make_diff
from pdeforge.tournament.synthesis import BASELINE_EVALUATIONS, detect_saturation
from tournament_fuzz import protocol_violations, run_fuzzed


@pytest.fixture(autouse=True)
def quiet_logs():
    logging.disable(logging.WARNING)
    yield
    logging.disable(logging.NOTSET)


def verdict(capsys, k: int, title: str, checks: dict, started: float, budget: float | None = None):
    elapsed = time.perf_counter() - started
    if budget is not None:
        checks[f"runtime {elapsed:.1f} s < {budget:g} s"] = elapsed < budget
    failed = [name for name, ok in checks.items() if not ok]
    line = f"{'FAIL' if failed else 'PASS'} criterion {k}: {title} [{elapsed:.1f} s]"
    if failed:
        line += " -- failed: " + "; ".join(failed)
    with capsys.disabled():
        print("\n" + line)
    assert not failed, line


def test_criterion_01_evaluation_count(capsys):
    start = time.perf_counter()
    checks = {}
    for schedule, want in (("3", 9), ("4", 12), ("4+4", 24)):
        # three scripted judges whose patches keep improving, so every round the schedule allows is run
        result, backend, evaluator = run_fuzzed(100 + want, 8, schedule, judges=3, factors=[0.5])
        checks[f"rounds {schedule} -> {want} evaluations (got {result.evaluations_used})"] = \
            result.evaluations_used == want == len(evaluator.calls)
        checks[f"rounds {schedule}: protocol holds"] = not protocol_violations(result, backend, evaluator)
    for used in (9, 12):
        reduction = 1 - used / BASELINE_EVALUATIONS
        checks[f"{used} vs {BASELINE_EVALUATIONS}: {100 * reduction:.1f}% in [60, 75]"] = 0.60 <= reduction <= 0.75
    checks["9 evaluations is 71.9% fewer"] = f"{100 * (1 - 9 / 32):.1f}" == "71.9"
    checks["12 evaluations is 62.5% fewer"] = f"{100 * (1 - 12 / 32):.1f}" == "62.5"
    verdict(capsys, 1, "9/12/24 evaluations for 3, 4 and 4+4 rounds", checks, start, 30)


def test_criterion_02_metric_oracles(capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(100):
        pred, ref = rng.normal(size=(4, 64)), rng.normal(size=(4, 64))
        loop = []
        for b in range(4):
            num = math.sqrt(sum((float(p) - float(r)) ** 2 for p, r in zip(pred[b], ref[b])))
            den = math.sqrt(sum(float(r) ** 2 for r in ref[b]))
            loop.append(num / den)
        worst = max(worst, abs(nrmse(pred, ref).value - sum(loop) / 4))
    checks = {f"nrmse vs per-sample loop, worst {worst:.1e} <= 1e-12": worst <= 1e-12}
    seen = set()
    for mid, clean, violated in all_cases():
        seen.add(mid)
        checks[f"{mid}: clean {clean:g} == 0"] = clean == 0.0
        checks[f"{mid}: violation {violated:.3g} > 0"] = violated > 0.0
    invariants = {m for m in CATALOG if not m.startswith("general.")} | {"general.ic_mismatch"}
    missing = sorted(invariants - seen)
    checks[f"every invariant metric covered (missing {missing})"] = not missing
    verdict(capsys, 2, f"nrmse oracle and {len(seen)} invariant metrics both ways", checks, start, 10)


def test_criterion_03_convergence_order(capsys):
    start = time.perf_counter()
    hs = [0.1 / 2**k for k in range(5)]
    p_synth = convergence_order([(h, 3.7 * h**2) for h in hs])
    checks = {f"synthetic E = C h^2 gives p = {p_synth:.12f}": abs(p_synth - 2.0) <= 1e-9}

    task = registry_get("advection")
    fromm = SolverCandidate("fromm", program_source("advection_fromm"), "numerical", "genesis")
    samples = []
    for n in (128, 256, 512):
        grid = make_grid(task, n, 2)
        inputs = sample_initial_conditions(task, grid, 2, seed=0)
        res = execute(fromm, task, grid, inputs, ExecutionLimits(wall_clock_seconds=60))
        checks[f"N={n} guest ran ({res.status})"] = res.ok
        if not res.ok:
            break
        exact = advection_exact(inputs.data, np.asarray(grid.t_coordinates), task.params["beta"])
        samples.append((grid.dx, nrmse(res.solution, exact).value))
    if len(samples) == 3:
        p = convergence_order(samples)
        checks[f"second-order advection guest vs exact shift: p = {p:.3f} in [1.7, 2.3]"] = 1.7 <= p <= 2.3
    verdict(capsys, 3, "convergence-order estimator", checks, start, 20)


def test_criterion_04_stability_bound(capsys):
    start = time.perf_counter()
    dt = dt_max_diffusion(1 / 1024, 0.5)
    checks = {
        f"dt_max_diffusion(1/1024, 0.5) = {dt:.4e} -> 4.768e-07": f"{dt:.3e}" == "4.768e-07",
        "matches printed 4.77e-07 to 3 significant figures": f"{dt:.2e}" == "4.77e-07",
    }
    verdict(capsys, 4, "stability-bound arithmetic", checks, start)


def test_criterion_05_reaction_step(capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(5)
    u = np.concatenate([np.geomspace(1e-8, 0.5, 2000), 1 - np.geomspace(1e-8, 0.5, 2000),
                        rng.uniform(1e-8, 1 - 1e-8, 4000)])
    worst = 0.0
    for dt, rho in zip(rng.uniform(0, 2, 50), rng.uniform(0, 10, 50)):
        worst = max(worst, float(np.max(np.abs(reaction_exact_step(u, dt, rho) - reaction_naive_step(u, dt, rho)))))
    checks = {f"stable vs naive on [1e-8, 1-1e-8], worst {worst:.1e} <= 1e-12": worst <= 1e-12}
    for dt, rho in ((0.1, 1.0), (1.0, 10.0), (50.0, 20.0)):
        ends = reaction_exact_step(np.array([0.0, 1.0]), dt, rho)
        checks[f"u in {{0,1}} finite and in [0,1] at dt={dt}, rho={rho}"] = \
            bool(np.all(np.isfinite(ends)) and np.all((ends >= 0) & (ends <= 1)))

    # 1,000 random triples against a high-order ODE integration; time is rescaled
    # to [0, 1] so one vector solve covers every triple
    m = 1000
    u0, dts, rhos = rng.uniform(0, 1, m), rng.uniform(0, 1, m), rng.uniform(0.1, 5, m)
    k = dts * rhos
    sol = solve_ivp(lambda t, y: k * y * (1 - y), (0, 1), u0, method="DOP853", rtol=1e-13, atol=1e-16)
    oracle = sol.y[:, -1]
    step = np.array([reaction_exact_step(np.array([a]), d, r)[0] for a, d, r in zip(u0, dts, rhos)])
    err = float(np.max(np.abs(step - oracle)))
    checks[f"1,000 triples vs ODE oracle, worst {err:.1e} <= 1e-10"] = err <= 1e-10
    verdict(capsys, 5, "reaction step fidelity", checks, start)


def _physics_inputs(tid, N, T=None, batch=3, t_end=None):
    task = registry_get(tid)
    grid = make_grid(task, N, T, t_end) if task.time_dependent else make_grid(task, N)
    return task, grid, sample_initial_conditions(task, grid, batch, seed=0)


def test_criterion_06_reference_physics(capsys):
    start = time.perf_counter()
    checks = {}

    task, grid, inputs = _physics_inputs("advection", 64, 5, t_end=0.5)
    for scheme in ("exact_spectral", "second_order_fv"):
        out = solve_reference(task, grid, inputs, ReferenceConfig(scheme=scheme)).data
        mass = out.sum(axis=-1) * grid.dx
        drift = float(np.max(np.abs(mass - mass[:, :1])))
        checks[f"advection {scheme} mass drift {drift:.1e} <= 1e-12"] = drift <= 1e-12
        if scheme == "exact_spectral":
            l2 = np.sqrt((out**2).sum(axis=-1) * grid.dx)
            d2 = float(np.max(np.abs(l2 - l2[:, :1])))
            checks[f"advection L2 drift {d2:.1e} <= 1e-12"] = d2 <= 1e-12

    task, grid, inputs = _physics_inputs("burgers", 128, 8, batch=4)
    out = solve_reference(task, grid, inputs).data
    tv_up = float(np.max(np.diff(total_variation(out), axis=1)))
    checks[f"burgers TV non-increasing (max step {tv_up:.1e})"] = tv_up <= 1e-12
    mean = out.mean(axis=-1)
    md = float(np.max(np.abs(mean - mean[:, :1])))
    checks[f"burgers mean drift {md:.1e} <= 1e-10"] = md <= 1e-10

    task, grid, inputs = _physics_inputs("reaction_diffusion", 64, 5, t_end=0.2)
    out = solve_reference(task, grid, inputs).data
    checks[f"reaction-diffusion in [0,1] (min {out.min():.3f}, max {out.max():.3f})"] = \
        out.min() >= 0.0 and out.max() <= 1.0

    def u0(n):
        x = np.arange(n) / n
        return (0.5 + 0.3 * np.sin(2 * np.pi * x) + 0.1 * np.cos(4 * np.pi * x))[None]

    t = np.array([0.0, 0.02, 0.05])
    fine = reaction_diffusion_reference(u0(256), t, 0.5, 1.0, 1 / 256)
    errs = [(1 / n, float(np.sqrt(np.mean((reaction_diffusion_reference(u0(n), t, 0.5, 1.0, 1 / n)
                                          - fine[:, :, ::256 // n]) ** 2)))) for n in (32, 64)]
    order = convergence_order(errs)
    checks[f"reaction-diffusion empirical order {order:.2f} >= 1.7"] = order >= 1.7

    task, grid, inputs = _physics_inputs("darcy", 32, batch=2)
    u = solve_reference(task, grid, inputs).data
    res = darcy_residual(task, u, inputs.data, grid).value
    checks[f"darcy residual {res:.1e} <= 1e-10"] = res <= 1e-10
    checks["darcy boundary trace is zero"] = bool(np.all(darcy_boundary_trace(u) == 0.0))

    task, grid, inputs = _physics_inputs("navier_stokes", 64, 4, batch=2, t_end=0.1)
    out = solve_reference(task, grid, inputs).data
    rho, p = out[..., 0], out[..., 2]
    checks[f"navier-stokes positivity (min rho {rho.min():.3f}, min p {p.min():.3f})"] = \
        rho.min() > 0 and p.min() > 0
    mass = rho.sum(axis=-1) * grid.dx
    mdrift = float(np.max(np.abs(mass - mass[:, :1]) / mass[:, :1]))
    checks[f"navier-stokes mass drift {mdrift:.1e} <= 1e-8"] = mdrift <= 1e-8
    verdict(capsys, 6, "reference-solver physics", checks, start, 60)


def _mutate(source: str, rng: random.Random) -> str:
    lines = source.splitlines(keepends=True)
    for _ in range(rng.randint(1, 6)):
        op = rng.choice(("delete", "insert", "replace", "duplicate"))
        i = rng.randrange(len(lines) + 1) if lines else 0
        if op == "insert" or not lines:
            lines.insert(i, rng.choice(["# tuned\n", "    dt *= 0.5\n", "\n", "import math\n"]))
        elif i < len(lines):
            if op == "delete":
                del lines[i]
            elif op == "replace":
                lines[i] = lines[i].replace("0.5", "0.25") if "0.5" in lines[i] else "    pass\n"
            else:
                lines.insert(i, lines[i])
    out = "".join(lines)
    if rng.random() < 0.2:
        out = out.rstrip("\n")  # exercise the no-newline marker
    return out


def test_criterion_07_patch_roundtrip(capsys):
    start = time.perf_counter()
    rng = random.Random(7)
    fixtures = [program_source(n) for n in NAMES] + \
        [DEFAULT_PROMPTS.raw(f"templates/{t}.py.txt") for t in ("advection", "burgers", "reaction_diffusion",
                                                             "navier_stokes", "darcy")]
    ok = 0
    for _ in range(50):
        old = _mutate(rng.choice(fixtures), rng) if rng.random() < 0.3 else rng.choice(fixtures)
        new = _mutate(old, rng)
        ok += apply_patch(old, make_diff(old, new)) == new
    checks = {f"{ok}/50 oracle diffs reproduce the target byte-exactly": ok == 50}

    base = program_source("reaction_diffusion_strang")
    target = base.replace("eps=1e-10", "eps=1e-12")
    diff = make_diff(base, target)
    try:
        apply_patch(base.replace("eps=1e-10", "eps=1e-9"), diff)
        checks["context mismatch raises ContextMismatchError"] = False
    except ContextMismatchError:
        checks["context mismatch raises ContextMismatchError"] = True
    overlapping = ("--- a/s\n+++ b/s\n@@ -1,2 +1,2 @@\n-import math\n+import cmath\n \n"
                   "@@ -2,2 +2,2 @@\n \n-import numpy as np\n+import numpy\n")
    try:
        apply_patch(base, overlapping)
        checks["overlapping hunks raise OverlappingHunksError"] = False
    except OverlappingHunksError:
        checks["overlapping hunks raise OverlappingHunksError"] = True
    verdict(capsys, 7, "diff/patch round-trip", checks, start)


def test_criterion_08_tournament_invariants(capsys):
    start = time.perf_counter()
    failures = []
    stats = {"verdicts": 0, "dropped": 0, "cycles": 0, "saturated_cycles": 0, "carried": 0}
    for seed in range(1000):
        rng = random.Random(seed)
        params = dict(n=rng.choice([2, 4, 6, 8, 10]), schedule=rng.choice(["1", "2", "3", "4", "4+4", "2+3"]),
                      judges=rng.choice([2, 3, 4]), feedback=rng.choice(["nrmse", "residual", "none"]),
                      p_bad_verdict=0.2, p_bad_patch=0.2, p_fail=0.1, p_debug=0.1, drop_allowed=True)
        result, backend, evaluator = run_fuzzed(seed, **params)
        problems = protocol_violations(result, backend, evaluator)
        if problems:
            failures.append((seed, problems[0]))
        st = result.state
        stats["verdicts"] += sum(len(v) for v in st.verdicts.values())
        stats["dropped"] += len(st.dropped_judges)
        stats["cycles"] += len(st.best_of_round)
        stats["saturated_cycles"] += sum(len(h) < st.config.caps[c - 1] for c, h in st.best_of_round.items())
        stats["carried"] += sum(1 for p, _ in backend.calls if p.endswith(".patch_repair"))
    checks = {f"1,000 fuzzed trials without a protocol violation (first failures {failures[:2]})": not failures,
              f"fuzzing reached drops ({stats['dropped']}), repairs ({stats['carried']}) and saturation "
              f"({stats['saturated_cycles']} of {stats['cycles']} cycles)":
                  stats["dropped"] > 0 and stats["carried"] > 0 and stats["saturated_cycles"] > 0}
    constructed = [([0.10, 0.05, 0.02], False), ([0.10, 0.0999, 0.0999], True), ([0.10], False),
                   ([0.10, 0.0999], False), ([1.0, 0.995, 0.99], True), ([1.0, 0.98, 0.975], False),
                   ([1.0, 0.9901, 0.980199], True), ([1.0, 0.5, 0.4999, 0.4998], True), ([None, None, None], False)]
    for history, want in constructed:
        checks[f"saturation {history} -> {want}"] = detect_saturation(history, 0.01, 2) is want
    verdict(capsys, 8, f"tournament protocol under 1,000 fuzzed trials ({stats['verdicts']} verdicts)",
            checks, start)


def _snapshot(run_dir):
    out = {}
    for p in sorted(run_dir.rglob("*")):
        rel = p.relative_to(run_dir)
        if p.is_file() and rel.parts[0] not in ("transcripts", "executions", "reference") \
                and p.name != "timings.json":
            out[str(rel)] = p.read_bytes()
    return out


def test_criterion_09_end_to_end_determinism(capsys, tmp_path):
    start = time.perf_counter()
    recorded = tmp_path / "recorded"
    checks = {"recorded reaction-diffusion run": main(["run", "--run-dir", str(recorded)]) == 0}
    transcripts = json.dumps(str(recorded / "transcripts"))
    snaps = []
    for name in ("replay-1", "replay-2"):
        code = main(["run", "--run-dir", str(tmp_path / name), "--mode", "replay",
                     "--set", f"backend.transcripts={transcripts}"])
        checks[f"{name} completed"] = code == 0
        snaps.append(_snapshot(tmp_path / name))
    a, b = snaps
    for rel in ("manifest.json", "report.md", "costs.json"):
        checks[f"{rel} byte-identical across replays"] = rel in a and a[rel] == b.get(rel)
    ledgers = [k for k in a if k.startswith("tournament/round-")]
    checks[f"{len(ledgers)} round ledgers byte-identical"] = bool(ledgers) and all(a[k] == b.get(k) for k in ledgers)
    checks["no other file differs"] = a == b
    manifest = json.loads(a.get("manifest.json", b"{}"))
    used = manifest.get("stages", {}).get("synthesis", {}).get("evaluations_used")
    checks[f"replayed run used {used} evaluations (9-12)"] = used is not None and 9 <= used <= 12

    fixture = write_run(tmp_path / "fixture", four_round_ledgers())
    text = write_report(fixture)
    checks["four-round fixture ledger reports a 77× improvement"] = "77× error reduction" in text
    verdict(capsys, 9, "end-to-end determinism and 77× fixture", checks, start)


def test_criterion_10_cost_arithmetic(capsys):
    start = time.perf_counter()
    c = cost_total([UsageRecord(100_000, 50_000, "any", "judge")], DEFAULT_PRICES)
    checks = {f"100k in + 50k out at $2.50/$10.00 -> ${c['total']}": c["total"] == 0.75,
              "input $0.25, output $0.50": c["input_cost"] == 0.25 and c["output_cost"] == 0.50}
    rng = random.Random(10)
    prices = PriceTable({"a": (2.5, 10.0), "b": (0.15, 0.6)}, default=(1.0, 4.0))
    worst = 0.0
    for _ in range(500):
        ledger = [UsageRecord(rng.randrange(10**6), rng.randrange(10**6), rng.choice("abc"), "p")
                  for _ in range(rng.randrange(0, 40))]
        cuts = sorted(rng.sample(range(len(ledger) + 1), min(3, len(ledger) + 1)))
        parts = [ledger[i:j] for i, j in zip([0] + cuts, cuts + [len(ledger)])]
        whole = cost_total(ledger, prices)["total"]
        split = sum(cost_total(p, prices)["total"] for p in parts)
        worst = max(worst, abs(whole - split) / max(1.0, whole))
    checks[f"linearity over 500 random partitions, worst relative gap {worst:.1e} <= 1e-12"] = worst <= 1e-12
    verdict(capsys, 10, "cost arithmetic", checks, start)
