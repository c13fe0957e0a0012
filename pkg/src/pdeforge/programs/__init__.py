"""Built-in guest programs: known-good references for harness checks and
the starting sources of the scripted demo."""

from importlib import resources

NAMES = ("reaction_diffusion_strang", "reaction_diffusion_tunable", "advection_fromm")


def program_source(name: str) -> str:
    if name not in NAMES:
        raise KeyError(f"no built-in program {name!r}; choose from {NAMES}")
    return (resources.files(__package__) / f"{name}.py").read_text(encoding="utf-8")
