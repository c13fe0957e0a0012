"""Child-process entry point: python -m pdeforge.guest <manifest.json>

Loads the candidate's `solver` function from the source file named in the
manifest, calls it with the manifest's arguments, and writes the returned
array as a TensorFile.
"""

from __future__ import annotations

import importlib.util
import json
import sys

import numpy as np

from . import tensorio


def _load_solver(path: str):
    spec = importlib.util.spec_from_file_location("candidate_solver", path)
    module = importlib.util.module_from_spec(spec)
    sys.modules["candidate_solver"] = module
    spec.loader.exec_module(module)
    if not callable(getattr(module, "solver", None)):
        raise AttributeError("the program defines no callable named `solver`")
    return module.solver


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 1:
        print("usage: python -m pdeforge.guest <manifest.json>", file=sys.stderr)
        return 2
    with open(argv[0]) as fh:
        manifest = json.load(fh)
    solver = _load_solver(manifest["source_path"])
    args = []
    for arg in manifest["arguments"]:
        kind = arg["kind"]
        if kind == "tensor":
            args.append(tensorio.load(manifest["input_paths"][arg["name"]]))
        elif kind == "time":
            args.append(np.asarray(manifest["t_coordinates"], dtype=np.float64))
        else:
            args.append(float(manifest["params"][arg.get("param", arg["name"])]))
    result = solver(*args)
    tensorio.store(np.asarray(result, dtype=np.float64), manifest["output_path"])
    return 0


if __name__ == "__main__":
    sys.exit(main())
