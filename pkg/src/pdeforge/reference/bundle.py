"""Reference bundles: inputs and trusted solutions on disk."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

from .. import tensorio
from ..domain import GridSpec, PdeTask, SolutionField, registry_get, sample_initial_conditions
from .solvers import ReferenceConfig, solve_reference

INPUTS = "inputs.pdet"
SOLUTIONS = "solutions.pdet"
MANIFEST = "manifest.json"


class BundleError(RuntimeError):
    pass


@dataclass
class ReferenceBundle:
    path: Path
    task: PdeTask
    grid: GridSpec
    seed: int
    inputs: SolutionField
    solutions: SolutionField
    manifest: dict


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def generate_reference_set(task: PdeTask, grid: GridSpec, batch: int, seed: int, cfg: ReferenceConfig | None, out_dir) -> ReferenceBundle:
    cfg = cfg or ReferenceConfig()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    inputs = sample_initial_conditions(task, grid, batch, seed)
    solutions = solve_reference(task, grid, inputs, cfg)
    tensorio.store(inputs.data, out / INPUTS)
    tensorio.store(solutions.data, out / SOLUTIONS)
    manifest = {
        "task": task.to_dict(),
        "grid": grid.to_dict(),
        "seed": int(seed),
        "batch": int(batch),
        "scheme": cfg.scheme_for(task.task_id),
        "oversample_factor": cfg.oversample_for(task.task_id),
        "config": asdict(cfg),
        "components": {"inputs": list(inputs.component_names), "solutions": list(solutions.component_names)},
        "hashes": {INPUTS: sha256_file(out / INPUTS), SOLUTIONS: sha256_file(out / SOLUTIONS)},
    }
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return ReferenceBundle(out, task, grid, int(seed), inputs, solutions, manifest)


def load_bundle(path) -> ReferenceBundle:
    path = Path(path)
    try:
        manifest = json.loads((path / MANIFEST).read_text())
    except FileNotFoundError as exc:
        raise BundleError(f"no bundle manifest in {path}") from exc
    for name, digest in manifest["hashes"].items():
        if sha256_file(path / name) != digest:
            raise BundleError(f"{name} in {path} does not match its recorded hash")
    t = manifest["task"]
    task = registry_get(t["task_id"], t["params"])
    comps = manifest.get("components", {})
    return ReferenceBundle(
        path,
        task,
        GridSpec.from_dict(manifest["grid"]),
        manifest["seed"],
        SolutionField(tensorio.load(path / INPUTS), tuple(comps.get("inputs", ("u",)))),
        SolutionField(tensorio.load(path / SOLUTIONS), tuple(comps.get("solutions", ("u",)))),
        manifest,
    )
