"""General feedback metrics: nRMSE, convergence order, PDE residuals, CFL."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from ..domain import GridSpec, PdeTask, SolutionField
from ..reference.solvers import darcy_operator


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class FeedbackRecord:
    metric_id: str
    value: float
    per_sample: tuple[float, ...] | None = None
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise MetricError(f"{self.metric_id} produced a non-finite value")
        if self.per_sample is not None:
            object.__setattr__(self, "per_sample", tuple(float(v) for v in self.per_sample))

    def to_dict(self) -> dict:
        return {
            "metric_id": self.metric_id,
            "value": self.value,
            "per_sample": list(self.per_sample) if self.per_sample is not None else None,
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d) -> "FeedbackRecord":
        ps = d.get("per_sample")
        return cls(d["metric_id"], float(d["value"]), tuple(ps) if ps is not None else None, dict(d.get("metadata", {})))


def as_array(x) -> np.ndarray:
    return np.asarray(x.data if isinstance(x, SolutionField) else x, dtype=np.float64)


def _batch_record(metric_id: str, per_sample, **metadata) -> FeedbackRecord:
    per = np.asarray(per_sample, dtype=np.float64)
    value = float(per.mean()) if per.size else 0.0
    return FeedbackRecord(metric_id, value, tuple(per.tolist()), metadata)


def nrmse(pred, ref) -> FeedbackRecord:
    p, r = as_array(pred), as_array(ref)
    if p.shape != r.shape:
        raise MetricError(f"shape mismatch: prediction {p.shape} vs reference {r.shape}")
    if p.shape[0] == 0:
        raise MetricError("empty batch")
    axes = tuple(range(1, r.ndim))
    ref_norm = np.sqrt(np.sum(r * r, axis=axes))
    if np.any(ref_norm == 0):
        bad = int(np.flatnonzero(ref_norm == 0)[0])
        raise MetricError(f"reference sample {bad} has zero L2 norm")
    err = np.sqrt(np.sum((p - r) ** 2, axis=axes))
    return _batch_record("general.nrmse", err / ref_norm)


def convergence_order(samples: Sequence[tuple[float, float]]) -> float:
    """Mean of consecutive-pair estimates log(E1/E2)/log(h1/h2)."""
    if len(samples) < 2:
        raise MetricError("need at least two (h, E) pairs")
    hs = [float(h) for h, _ in samples]
    es = [float(e) for _, e in samples]
    if any(e <= 0 for e in es):
        raise MetricError("errors must be positive")
    for h1, h2 in zip(hs, hs[1:]):
        if h1 == h2:
            raise MetricError("grid spacings must differ")
        if h2 > h1:
            raise MetricError("grid spacings must be strictly decreasing")
    orders = [math.log(e1 / e2) / math.log(h1 / h2) for (h1, e1), (h2, e2) in zip(zip(hs, es), zip(hs[1:], es[1:]))]
    return sum(orders) / len(orders)


# --- discrete operators (periodic, central) -------------------------------

def d_dx(u, dx):
    return (np.roll(u, -1, axis=-1) - np.roll(u, 1, axis=-1)) / (2.0 * dx)


def d2_dx2(u, dx):
    return (np.roll(u, -1, axis=-1) - 2.0 * u + np.roll(u, 1, axis=-1)) / dx**2


def _time_pieces(u, grid: GridSpec):
    t = grid.t_array()
    if u.shape[1] < 2 or len(t) < 2:
        raise MetricError("residual needs at least two output times")
    if u.shape[1] != len(t):
        raise MetricError(f"field has {u.shape[1]} time slices, grid has {len(t)}")
    dt = np.diff(t).reshape((1, -1) + (1,) * (u.ndim - 2))
    return (u[:, 1:] - u[:, :-1]) / dt, u[:, :-1]


def _rms(r):
    axes = tuple(range(1, r.ndim))
    return np.sqrt(np.mean(r * r, axis=axes))


def ns_conserved(state, gamma):
    rho, v, p = state[..., 0], state[..., 1], state[..., 2]
    return rho, rho * v, p / (gamma - 1.0) + 0.5 * rho * v * v


def pde_residual(task: PdeTask, fld, grid: GridSpec, coefficient=None) -> FeedbackRecord:
    """Normalised L2 (RMS over the space-time grid) of the discrete residual.

    Darcy needs the coefficient field a(x) through `coefficient`.
    """
    u = as_array(fld)
    P = task.params
    tid = task.task_id
    if tid == "darcy":
        if coefficient is None:
            raise MetricError("darcy residual needs the coefficient field")
        return darcy_residual(task, u, coefficient, grid)
    dx = grid.dx
    ut, un = _time_pieces(u, grid)
    if tid == "advection":
        r = ut + P["beta"] * d_dx(un, dx)
    elif tid == "burgers":
        r = ut + d_dx(0.5 * un * un, dx) - P["nu"] * d2_dx2(un, dx)
    elif tid == "reaction_diffusion":
        r = ut - P["nu"] * d2_dx2(un, dx) - P["rho"] * un * (1.0 - un)
    else:
        gamma = P["gamma"]
        mu = P["zeta"] + 4.0 * P["eta"] / 3.0
        dts = np.diff(grid.t_array()).reshape(1, -1, 1)
        later, earlier = ns_conserved(u[:, 1:], gamma), ns_conserved(u[:, :-1], gamma)
        U_t = [(a - b) / dts for a, b in zip(later, earlier)]
        rho, m, E = ns_conserved(un, gamma)
        v, p = un[..., 1], un[..., 2]
        sigma = mu * d_dx(v, dx)
        parts = [
            U_t[0] + d_dx(m, dx),
            U_t[1] + d_dx(m * v + p - sigma, dx),
            U_t[2] + d_dx((E + p) * v - v * sigma, dx),
        ]
        per_eq = [_rms(r) for r in parts]
        return _batch_record(
            "general.residual",
            sum(per_eq),
            per_equation=[float(x.mean()) for x in per_eq],
        )
    return _batch_record("general.residual", _rms(r))


def darcy_residual(task: PdeTask, u, a, grid: GridSpec) -> FeedbackRecord:
    """RMS of beta + div(a grad u) on the five-point stencil, relative to |beta|."""
    u, a = as_array(u), as_array(a)
    if u.shape != a.shape:
        raise MetricError(f"solution {u.shape} and coefficient {a.shape} shapes differ")
    beta = task.params["beta_source"]
    scale = abs(beta) if beta != 0 else 1.0
    per = []
    for ub, ab in zip(u, a):
        r = beta - darcy_operator(ab, grid.dx) @ ub.ravel()
        per.append(math.sqrt(float(np.mean(r * r))) / scale)
    return _batch_record("general.residual", per)


def cfl_max(task: PdeTask, fld, dt: float, dx: float) -> FeedbackRecord:
    if not (dt > 0 and dx > 0):
        raise MetricError("dt and dx must be positive")
    tid = task.task_id
    P = task.params
    if tid == "advection":
        value = abs(P["beta"]) * dt / dx
        kind = "advective"
    elif tid == "burgers":
        value = float(np.max(np.abs(as_array(fld)))) * dt / dx if fld is not None else 0.0
        kind = "advective"
    elif tid == "reaction_diffusion":
        value = P["nu"] * dt / dx**2
        kind = "diffusive"
    elif tid == "navier_stokes":
        s = as_array(fld)
        rho, v, p = s[..., 0], s[..., 1], s[..., 2]
        c = np.sqrt(P["gamma"] * p / rho)
        value = float(np.max(np.abs(v) + c)) * dt / dx
        kind = "acoustic"
    else:
        raise MetricError("CFL is undefined for the steady darcy task")
    return FeedbackRecord("general.cfl_max", float(value), None, {"kind": kind, "dt": dt, "dx": dx})
