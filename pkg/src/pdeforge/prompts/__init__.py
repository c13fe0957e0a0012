"""Prompt assets with {{placeholder}} substitution.

Assets ship inside the package. A run may point at an override directory;
any file found there shadows the packaged one with the same name.
"""

from __future__ import annotations

import re
from importlib import resources
from pathlib import Path

from ..domain import PdeTask

PLACEHOLDER = re.compile(r"\{\{([A-Za-z_][A-Za-z0-9_]*)\}\}")

ANALYSIS_STEPS = ("classify", "analytical", "transform", "splitting", "stability")
GENESIS_ASSETS = {
    "analytical": "genesis_analytical",
    "transform": "genesis_transform",
    "hybrid": "genesis_hybrid",
    "numerical": "genesis_numerical",
}


class PromptError(KeyError):
    pass


class MissingAssetError(PromptError):
    pass


def render_text(text: str, **values) -> str:
    def sub(m):
        key = m.group(1)
        if key not in values:
            raise PromptError(f"no value for placeholder {{{{{key}}}}}")
        return str(values[key])

    return PLACEHOLDER.sub(sub, text)


class PromptSet:
    def __init__(self, override_dir=None):
        self.override_dir = Path(override_dir) if override_dir else None
        self._root = resources.files(__package__) / "assets"

    def raw(self, name: str) -> str:
        rel = name if "." in Path(name).name else f"{name}.txt"
        if self.override_dir is not None:
            p = self.override_dir / rel
            if p.is_file():
                return p.read_text(encoding="utf-8")
        node = self._root
        for part in Path(rel).parts:
            node = node / part
        if not node.is_file():
            raise MissingAssetError(f"prompt asset {rel!r} not found")
        return node.read_text(encoding="utf-8")

    def render(self, name: str, **values) -> str:
        return render_text(self.raw(name), **values)

    def require(self, names) -> None:
        for n in names:
            self.raw(n)

    def describe(self, task: PdeTask) -> str:
        return self.render(task.description_template, **{k: _fmt(v) for k, v in task.params.items()}).strip()

    def solver_template(self, task: PdeTask) -> str:
        return self.raw(f"templates/{task.task_id}.py.txt").rstrip("\n")

    def criteria(self) -> str:
        return self.raw("code_generation_criteria").rstrip("\n")

    def system(self) -> str:
        return self.raw("system").strip()


def _fmt(v: float) -> str:
    return f"{v:g}"


DEFAULT_PROMPTS = PromptSet()
