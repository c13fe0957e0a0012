"""Run candidate programs as isolated child processes."""

from __future__ import annotations

import json
import os
import re
import resource
import shutil
import signal
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import tensorio
from ..domain import GridSpec, PdeTask, SolutionField, expected_output_shape, NS_COMPONENTS
from ..genesis import SolverCandidate

STATUSES = ("ok", "guest_error", "timeout", "contract_violation", "nonfinite_output")
DEFAULT_COMMAND = ("{python}", "-m", "pdeforge.guest", "{manifest}")


class HarnessError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExecutionLimits:
    wall_clock_seconds: float = 120.0
    memory_bytes: int = 2 * 1024**3
    max_debug_iterations: int = 4

    def __post_init__(self):
        if not (self.wall_clock_seconds > 0 and self.memory_bytes > 0 and self.max_debug_iterations > 0):
            raise ValueError("execution limits must be positive")


@dataclass
class ExecutionResult:
    status: str
    solution: SolutionField | None = None
    stderr_trace: str = ""
    stdout: str = ""
    runtime_seconds: float = 0.0
    diagnostics: dict = field(default_factory=dict)
    debug_iterations_used: int = 0
    message: str = ""

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")
        if self.status == "ok" and (self.solution is None or not self.solution.is_finite()):
            raise ValueError("an ok result needs a finite solution")

    @property
    def ok(self) -> bool:
        return self.status == "ok"


# --- diagnostics -----------------------------------------------------------

_NUM = r"([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)"
_DT_MAX = re.compile(r"dt_max\s*[=:]\s*" + _NUM)
_USING = re.compile(r"Using\s+(\d+)\s+internal time steps", re.IGNORECASE)
_INTERNAL = re.compile(r"Internal steps:\s*(\d+)", re.IGNORECASE)
_PROGRESS = re.compile(r"Time step\s+(\d+)\s*/\s*(\d+)\s+completed\s*\(internal steps:\s*(\d+)\)", re.IGNORECASE)


def parse_diagnostics(stdout: str) -> dict:
    """Fields printed by the guest; absent ones are left out."""
    out: dict = {}
    m = _DT_MAX.search(stdout)
    if m:
        out["dt_max"] = float(m.group(1))
    m = _USING.search(stdout) or _INTERNAL.search(stdout)
    if m:
        out["internal_steps"] = int(m.group(1))
    progress = [
        {"step": int(a), "of": int(b), "internal_steps": int(c)} for a, b, c in _PROGRESS.findall(stdout)
    ]
    if progress:
        out["progress"] = progress
        out["total_internal_steps"] = progress[-1]["internal_steps"]
    return out


# --- invocation ------------------------------------------------------------

def guest_arguments(task: PdeTask) -> list[dict]:
    args = []
    for name, kind in task.solver_signature:
        if kind == "tensor[T+1]":
            args.append({"name": name, "kind": "time"})
        elif kind.startswith("tensor"):
            args.append({"name": name, "kind": "tensor"})
        else:
            param = "beta_source" if (task.task_id == "darcy" and name == "beta") else name
            args.append({"name": name, "kind": "scalar", "param": param})
    return args


def guest_inputs(task: PdeTask, inputs) -> dict[str, np.ndarray]:
    data = np.asarray(inputs.data if isinstance(inputs, SolutionField) else inputs, dtype=np.float64)
    if task.task_id == "navier_stokes":
        comp = {name: data[..., i] for i, name in enumerate(NS_COMPONENTS)}
        return {"Vx0": comp["velocity"], "density0": comp["density"], "pressure0": comp["pressure"]}
    (name, _), = [s for s in task.solver_signature if s[1].startswith("tensor[batch")]
    return {name: data}


def _limit_memory(nbytes: int):
    def apply():
        resource.setrlimit(resource.RLIMIT_AS, (nbytes, nbytes))

    return apply


def _kill_group(pid: int) -> None:
    try:
        os.killpg(pid, signal.SIGKILL)
    except (ProcessLookupError, PermissionError):
        pass


def execute(
    candidate: SolverCandidate,
    task: PdeTask,
    grid: GridSpec,
    inputs,
    limits: ExecutionLimits = ExecutionLimits(),
    workdir=None,
    guest_command=DEFAULT_COMMAND,
) -> ExecutionResult:
    """Write the invocation manifest, run the guest, validate its output."""
    own_dir = workdir is None
    wd = Path(tempfile.mkdtemp(prefix="pdeforge-exec-")) if own_dir else Path(workdir).resolve()
    wd.mkdir(parents=True, exist_ok=True)
    try:
        return _execute_in(candidate, task, grid, inputs, limits, wd, guest_command)
    finally:
        if own_dir:
            shutil.rmtree(wd, ignore_errors=True)


def _execute_in(candidate, task, grid, inputs, limits, wd: Path, guest_command) -> ExecutionResult:
    source_path = wd / "solver.py"
    source_path.write_text(candidate.source, encoding="utf-8")
    input_paths = {}
    batch = None
    for name, arr in guest_inputs(task, inputs).items():
        p = wd / f"{name}.pdet"
        tensorio.store(arr, p)
        input_paths[name] = p.name
        batch = arr.shape[0]
    output_path = wd / "output.pdet"
    if output_path.exists():
        output_path.unlink()
    manifest = {
        "task_id": task.task_id,
        "params": dict(task.params),
        "input_paths": input_paths,
        "output_path": output_path.name,
        "t_coordinates": list(grid.t_coordinates) if task.time_dependent else [],
        "source_path": source_path.name,
        "arguments": guest_arguments(task),
    }
    manifest_path = wd / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2))

    # paths are relative to the working directory so traces do not depend on where the run lives
    cmd = [part.format(python=sys.executable, manifest=manifest_path.name, source=source_path.name)
           for part in guest_command]
    env = dict(os.environ)
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        env.setdefault(var, "1")
    start = time.monotonic()
    proc = subprocess.Popen(
        cmd,
        cwd=wd,
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        stdin=subprocess.DEVNULL,
        start_new_session=True,
        preexec_fn=_limit_memory(limits.memory_bytes),
        env=env,
    )
    timed_out = False
    try:
        out, err = proc.communicate(timeout=limits.wall_clock_seconds)
    except subprocess.TimeoutExpired:
        timed_out = True
        _kill_group(proc.pid)
        out, err = proc.communicate()
    finally:
        _kill_group(proc.pid)
    runtime = time.monotonic() - start
    stdout = out.decode("utf-8", "replace")
    stderr = err.decode("utf-8", "replace")
    (wd / "stdout.txt").write_text(stdout)
    (wd / "stderr.txt").write_text(stderr)
    diag = parse_diagnostics(stdout)

    def result(status, message="", solution=None):
        return ExecutionResult(status, solution, stderr, stdout, runtime, diag, 0, message)

    if timed_out:
        return result("timeout", f"killed after {limits.wall_clock_seconds:g} s")
    if proc.returncode != 0:
        return result("guest_error", f"exit status {proc.returncode}")
    expected = expected_output_shape(task, grid, batch)
    if not output_path.exists():
        return result("contract_violation", "the guest wrote no output file")
    try:
        data = tensorio.load(output_path)
    except tensorio.TensorFileError as exc:
        return result("contract_violation", f"unreadable output: {exc}")
    if tuple(data.shape) != tuple(expected):
        return result("contract_violation", f"output shape {tuple(data.shape)}, expected {tuple(expected)}")
    if not np.isfinite(data).all():
        bad = int(np.size(data) - np.count_nonzero(np.isfinite(data)))
        return result("nonfinite_output", f"{bad} non-finite output values")
    names = NS_COMPONENTS if task.task_id == "navier_stokes" else ("u",)
    return result("ok", solution=SolutionField(data, names))
