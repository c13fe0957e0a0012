"""Constructed clean and violating inputs for every invariant metric.

Each case yields (metric_id, clean_value, violated_value). Clean inputs are
chosen so the metric is exactly zero by construction.
"""

import numpy as np

from pdeforge.domain import make_grid, registry_get
from pdeforge.metrics import invariant_metrics
from pdeforge.metrics.invariants import logistic_update

N = 32


def _value(records, mid):
    return next(r.value for r in records if r.metric_id == mid)


def _wave():
    x = np.arange(N) / N
    return 0.5 + 0.2 * np.sin(2 * np.pi * x) + 0.05 * np.cos(6 * np.pi * x)


def _static(u0, T=4):
    return np.repeat(u0[None, None], T + 1, axis=1)


def advection_cases():
    task = registry_get("advection", {"beta": 0.0})
    grid = make_grid(task, N, 4)
    u0 = _wave()
    clean = _static(u0)
    shifted = clean.copy()
    shifted[:, 2:] = np.roll(u0, 1)
    damped = clean.copy()
    damped[:, 3:] = 0.5 + 0.9 * (u0 - 0.5)
    lifted = clean.copy()
    lifted[:, 1:] += 0.1
    scaled = 0.9 * clean
    scaled[:, 0] = u0
    ref0 = u0[None]
    bad = {
        "advection.phase_error": shifted,
        "advection.amp_error": damped,
        "advection.mass_drift": lifted,
        "advection.l2_drift": scaled,
    }
    for mid, violated in bad.items():
        yield mid, _value(invariant_metrics(task, clean, grid, ref0), mid), \
            _value(invariant_metrics(task, violated, grid, ref0), mid)


def burgers_cases():
    task = registry_get("burgers")
    grid = make_grid(task, N, 4)
    u0 = _wave()
    clean = _static(u0)
    grown = clean.copy()
    grown[:, 2:] = 0.5 + 1.5 * (u0 - 0.5)
    wiggly = clean.copy()
    wiggly[:, 3:] += 0.01 * (-1.0) ** np.arange(N)
    shifted = clean.copy()
    shifted[:, 1:] += 0.05
    bad = {"burgers.entropy_violation": grown, "burgers.tv_growth": wiggly, "burgers.mean_drift": shifted}
    ref0 = u0[None]
    for mid, violated in bad.items():
        yield mid, _value(invariant_metrics(task, clean, grid, ref0), mid), \
            _value(invariant_metrics(task, violated, grid, ref0), mid)


def reaction_diffusion_cases():
    task = registry_get("reaction_diffusion")
    grid = make_grid(task, N, 4, t_end=0.4)
    rho = task.params["rho"]
    # spatially uniform trajectory built with the metric's own logistic flow
    traj = [np.full(N, 0.3)]
    for dt in np.diff(grid.t_array()):
        traj.append(logistic_update(traj[-1], dt, rho))
    clean = np.stack(traj)[None]
    over = clean.copy()
    over[0, 2, 5] = 1.1
    off = clean.copy()
    off[0, 3] += 1e-3
    yield ("reaction_diffusion.max_principle",
           _value(invariant_metrics(task, clean, grid), "reaction_diffusion.max_principle"),
           _value(invariant_metrics(task, over, grid), "reaction_diffusion.max_principle"))
    yield ("reaction_diffusion.reaction_split_error",
           _value(invariant_metrics(task, clean, grid), "reaction_diffusion.reaction_split_error"),
           _value(invariant_metrics(task, off, grid), "reaction_diffusion.reaction_split_error"))
    yield ("reaction_diffusion.stiffness_safety",
           _value(invariant_metrics(task, clean, grid, config={"internal_dt": 0.5}), "reaction_diffusion.stiffness_safety"),
           _value(invariant_metrics(task, clean, grid, config={"internal_dt": 2.0}), "reaction_diffusion.stiffness_safety"))


def navier_stokes_cases():
    task = registry_get("navier_stokes")
    grid = make_grid(task, N, 3, t_end=0.1)
    state = np.zeros((N, 3))
    state[:, 0] = 1.0
    state[:, 2] = 1.0
    clean = np.repeat(state[None, None], 4, axis=1)
    heavier = clean.copy()
    heavier[:, 2:, :, 0] = 1.1
    moving = clean.copy()
    moving[:, 2:, :, 1] = 0.1
    hotter = clean.copy()
    hotter[:, 2:, :, 2] = 1.2
    negative = clean.copy()
    negative[:, 1, 4, 0] = -0.2
    # density up at fixed pressure lowers s = ln p - gamma ln rho
    colder = clean.copy()
    colder[:, 2:, :, 0] = 1.1
    bump = clean.copy()
    bump[:, 1:, 8, 2] = 1.5
    ref0 = clean[:, 0]
    bad = {
        "navier_stokes.mass_drift": heavier,
        "navier_stokes.momentum_drift": moving,
        "navier_stokes.energy_drift": hotter,
        "navier_stokes.positivity": negative,
        "navier_stokes.entropy_production": colder,
        "navier_stokes.entropy_violation": colder,
        "navier_stokes.rh_defect": bump,
    }
    for mid, violated in bad.items():
        value = _value(invariant_metrics(task, violated, grid, ref0), mid)
        if mid == "navier_stokes.entropy_production":
            value = -value  # signed: a violation is negative production
        yield mid, _value(invariant_metrics(task, clean, grid, ref0), mid), value


def darcy_cases():
    clean_task = registry_get("darcy", {"beta_source": 0.0})
    task = registry_get("darcy")
    grid = make_grid(task, 8)
    a = np.full((1, 8, 8), 2.0)
    u = np.zeros((1, 8, 8))
    for mid in ("darcy.eta_estimator", "darcy.local_mass_balance", "darcy.global_compatibility"):
        yield mid, _value(invariant_metrics(clean_task, u, grid, a), mid), \
            _value(invariant_metrics(task, u, grid, a), mid)


def ic_mismatch_case():
    task = registry_get("burgers")
    grid = make_grid(task, N, 2)
    u0 = _wave()
    clean = _static(u0, 2)
    wrong = clean.copy()
    wrong[:, 0] += 0.1
    yield ("general.ic_mismatch", _value(invariant_metrics(task, clean, grid, u0[None]), "general.ic_mismatch"),
           _value(invariant_metrics(task, wrong, grid, u0[None]), "general.ic_mismatch"))


def all_cases():
    for gen in (advection_cases, burgers_cases, reaction_diffusion_cases, navier_stokes_cases, darcy_cases,
                ic_mismatch_case):
        yield from gen()
