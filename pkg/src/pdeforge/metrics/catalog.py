"""Static metric catalog and the feedback-type dispatcher used by Synthesis."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from ..domain import TASK_IDS, GridSpec, PdeTask
from .core import FeedbackRecord, MetricError, cfl_max, nrmse, pde_residual
from .invariants import invariant_metrics

_TIME = ("advection", "burgers", "reaction_diffusion", "navier_stokes")

# metric_id -> (tasks, requires_reference)
CATALOG: dict[str, tuple[tuple[str, ...], bool]] = {
    "general.nrmse": (TASK_IDS, True),
    "general.residual": (TASK_IDS, False),
    "general.cfl_max": (_TIME, False),
    "general.ic_mismatch": (_TIME, True),
    "general.convergence_order": (TASK_IDS, True),
    "advection.phase_error": (("advection",), False),
    "advection.amp_error": (("advection",), False),
    "advection.mass_drift": (("advection",), False),
    "advection.l2_drift": (("advection",), False),
    "burgers.entropy_violation": (("burgers",), False),
    "burgers.tv_growth": (("burgers",), False),
    "burgers.mean_drift": (("burgers",), False),
    "reaction_diffusion.max_principle": (("reaction_diffusion",), False),
    "reaction_diffusion.reaction_split_error": (("reaction_diffusion",), False),
    "reaction_diffusion.stiffness_safety": (("reaction_diffusion",), False),
    "navier_stokes.mass_drift": (("navier_stokes",), False),
    "navier_stokes.momentum_drift": (("navier_stokes",), False),
    "navier_stokes.energy_drift": (("navier_stokes",), False),
    "navier_stokes.positivity": (("navier_stokes",), False),
    "navier_stokes.entropy_production": (("navier_stokes",), False),
    "navier_stokes.entropy_violation": (("navier_stokes",), False),
    "navier_stokes.rh_defect": (("navier_stokes",), False),
    "darcy.eta_estimator": (("darcy",), False),
    "darcy.local_mass_balance": (("darcy",), False),
    "darcy.global_compatibility": (("darcy",), False),
}

SIGNED = {"navier_stokes.entropy_production"}


def catalog_listing() -> list[dict]:
    return [
        {"metric_id": mid, "tasks": list(tasks), "requires_reference": req, "signed": mid in SIGNED}
        for mid, (tasks, req) in CATALOG.items()
    ]


def catalog_json() -> str:
    return json.dumps(catalog_listing(), indent=2)


FEEDBACK_KINDS = ("nrmse", "residual", "none")


@dataclass(frozen=True)
class FeedbackType:
    kind: str = "nrmse"
    extras: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.kind not in FEEDBACK_KINDS:
            raise MetricError(f"feedback kind must be one of {FEEDBACK_KINDS}")
        object.__setattr__(self, "extras", tuple(self.extras))
        for mid in self.extras:
            if mid not in CATALOG:
                raise MetricError(f"unknown metric {mid!r}")

    @property
    def requires_reference(self) -> bool:
        return self.kind == "nrmse"

    @property
    def headline(self) -> str | None:
        return {"nrmse": "general.nrmse", "residual": "general.residual"}.get(self.kind)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "extras": list(self.extras)}

    @classmethod
    def from_value(cls, value) -> "FeedbackType":
        if isinstance(value, FeedbackType):
            return value
        if isinstance(value, str):
            return cls(value)
        return cls(value.get("kind", "nrmse"), tuple(value.get("extras", ())))


def compute_feedback(
    feedback: FeedbackType,
    task: PdeTask,
    grid: GridSpec,
    prediction,
    inputs=None,
    reference=None,
) -> list[FeedbackRecord]:
    """Headline metric for the feedback kind plus any requested extras."""
    wanted = ([feedback.headline] if feedback.headline else []) + list(feedback.extras)
    if not wanted:
        return []
    if any(CATALOG[m][1] for m in wanted) and reference is None:
        raise MetricError("this feedback needs a reference bundle")
    out: dict[str, FeedbackRecord] = {}
    coefficient = inputs if task.task_id == "darcy" else None
    for mid in wanted:
        if mid in out:
            continue
        if mid == "general.nrmse":
            out[mid] = nrmse(prediction, reference)
        elif mid == "general.residual":
            out[mid] = pde_residual(task, prediction, grid, coefficient=coefficient)
        elif mid == "general.cfl_max":
            dt = grid.t_coordinates[1] - grid.t_coordinates[0]
            out[mid] = cfl_max(task, prediction, dt, grid.dx)
        elif mid == "general.convergence_order":
            raise MetricError("convergence order needs runs at several resolutions; use convergence_order()")
        else:
            ref0 = inputs if inputs is not None else None
            for rec in invariant_metrics(task, prediction, grid, ref0=ref0):
                out.setdefault(rec.metric_id, rec)
            if mid not in out:
                raise MetricError(f"{mid} does not apply to {task.task_id}")
    return [out[m] for m in dict.fromkeys(wanted)]
