"""PDE-specific invariant and violation metrics.

Integrals use midpoint quadrature at grid resolution. Time-series quantities
are reduced per sample (max over output times for drifts and pointwise
violations, sums over steps for growth penalties) and then averaged over the
batch.
"""

from __future__ import annotations

from typing import Any, Mapping

import numpy as np

from ..domain import GridSpec, PdeTask
from ..reference.solvers import darcy_operator, ns_face_flux
from .core import FeedbackRecord, MetricError, _batch_record, as_array, ns_conserved

DOMINANT_MODE_FRACTION = 0.01


def _integral(u, dx):
    return np.sum(u, axis=-1) * dx


def _l2(u, dx):
    return np.sqrt(np.sum(u * u, axis=-1) * dx)


def _relative_drift(q, q0):
    """|q(t) - q0| / |q0|, falling back to the absolute change when q0 == 0."""
    q0 = np.asarray(q0)
    denom = np.where(q0 == 0, 1.0, np.abs(q0))
    return np.abs(q - q0[:, None]) / denom[:, None]


def ic_mismatch(u, u0, dx) -> FeedbackRecord:
    diff = (u[:, 0] - u0).reshape(u.shape[0], -1)
    return _batch_record("general.ic_mismatch", np.sqrt(np.sum(diff * diff, axis=-1) * dx))


# --- advection -------------------------------------------------------------

def dominant_modes(u0: np.ndarray, fraction: float = DOMINANT_MODE_FRACTION):
    """Indices (in rfft order, excluding the mean and Nyquist) holding at
    least `fraction` of the non-mean spectral energy, with energy weights."""
    n = u0.shape[-1]
    c = np.fft.rfft(u0) / n
    top = n // 2 if n % 2 else n // 2 - 1
    energy = np.abs(c[1 : top + 1]) ** 2
    total = energy.sum()
    if total == 0:
        return np.array([], dtype=int), np.array([])
    keep = np.flatnonzero(energy >= fraction * total) + 1
    w = np.abs(c[keep]) ** 2
    return keep, w / w.sum()


def advection_spectral_errors(u, t, beta, length=1.0):
    """Per-sample max over time of the phase and amplitude errors."""
    n = u.shape[-1]
    phase_per, amp_per, nmodes = [], [], []
    for ub in u:
        keep, w = dominant_modes(ub[0])
        nmodes.append(len(keep))
        if len(keep) == 0:
            phase_per.append(0.0)
            amp_per.append(0.0)
            continue
        c = np.fft.rfft(ub, axis=-1)[:, keep] / n
        k = 2.0 * np.pi * keep / length
        expected = c[0][None, :] * np.exp(-1j * np.outer(t * beta, k))
        # wrapped difference of angles is exactly zero when the spectra agree
        dphi = np.mod(np.angle(c) - np.angle(expected) + np.pi, 2.0 * np.pi) - np.pi
        damp = np.abs(c) - np.abs(c[0])[None, :]
        phase_per.append(float(np.max(np.sqrt(np.sum(w * dphi**2, axis=-1)))))
        amp_per.append(float(np.max(np.sqrt(np.sum(w * damp**2, axis=-1)))))
    return phase_per, amp_per, nmodes


def _advection(task, u, grid, u0):
    dx = grid.dx
    t = grid.t_array()
    phase, amp, nmodes = advection_spectral_errors(u, t, task.params["beta"], task.lengths[0])
    mass = _integral(u, dx)
    l2 = _l2(u, dx)
    m0, n0 = _integral(u0, dx), _l2(u0, dx)
    l2_signed = (l2 - n0[:, None]) / np.where(n0 == 0, 1.0, n0)[:, None]
    return [
        _batch_record("advection.phase_error", phase, modes_per_sample=nmodes, fraction=DOMINANT_MODE_FRACTION),
        _batch_record("advection.amp_error", amp, modes_per_sample=nmodes, fraction=DOMINANT_MODE_FRACTION),
        _batch_record("advection.mass_drift", _relative_drift(mass, m0).max(axis=1)),
        _batch_record(
            "advection.l2_drift",
            np.abs(l2_signed).max(axis=1),
            signed_final=[float(x) for x in l2_signed[:, -1]],
        ),
    ]


# --- burgers ---------------------------------------------------------------

def total_variation(u):
    return np.sum(np.abs(np.roll(u, -1, axis=-1) - u), axis=-1)


def _growth(q):
    return np.sum(np.maximum(0.0, np.diff(q, axis=1)), axis=1)


def _burgers(task, u, grid, u0):
    dx = grid.dx
    energy = _integral(0.5 * u * u, dx)
    return [
        _batch_record("burgers.entropy_violation", _growth(energy)),
        _batch_record("burgers.tv_growth", _growth(total_variation(u))),
        _batch_record("burgers.mean_drift", _relative_drift(_integral(u, dx), _integral(u0, dx)).max(axis=1)),
    ]


# --- reaction-diffusion ----------------------------------------------------

def logistic_update(u, dt, rho):
    g = np.exp(rho * dt)
    return u * g / (1.0 + u * (g - 1.0))


def max_principle_violation(u, dx):
    below = np.sqrt(np.sum(np.maximum(0.0, -u) ** 2, axis=-1) * dx)
    above = np.sqrt(np.sum(np.maximum(0.0, u - 1.0) ** 2, axis=-1) * dx)
    return below + above


def _reaction_diffusion(task, u, grid, u0, config):
    dx = grid.dx
    rho = task.params["rho"]
    t = grid.t_array()
    pairs = config.get("reaction_pairs")
    if pairs is None:
        # consecutive outputs, exact for spatially uniform fields
        pairs = [(u[:, n], u[:, n + 1], t[n + 1] - t[n]) for n in range(u.shape[1] - 1)]
        source = "output_slices"
    else:
        source = "supplied"
    eps = [_l2(np.asarray(after) - logistic_update(np.asarray(before), dt, rho), dx) for before, after, dt in pairs]
    react = np.max(np.stack(eps, axis=1), axis=1) if eps else np.zeros(u.shape[0])
    dt_used = float(config.get("internal_dt", np.max(np.diff(t)) if len(t) > 1 else 0.0))
    stiff = max(0.0, dt_used * rho - 1.0)
    return [
        _batch_record("reaction_diffusion.max_principle", max_principle_violation(u, dx).max(axis=1)),
        _batch_record("reaction_diffusion.reaction_split_error", react, pairs=source),
        _batch_record(
            "reaction_diffusion.stiffness_safety",
            np.full(u.shape[0], stiff),
            dt=dt_used,
            bound="dt*rho <= 1",
        ),
    ]


# --- navier-stokes ---------------------------------------------------------

def _ns_entropy_total(state, gamma, dx):
    rho, p = state[..., 0], state[..., 2]
    tiny = np.finfo(np.float64).tiny
    s = np.log(np.maximum(p, tiny)) - gamma * np.log(np.maximum(rho, tiny))
    return _integral(rho * s, dx)


def rankine_hugoniot_defect(state, t, params, dx):
    gamma, eta, zeta = params["gamma"], params["eta"], params["zeta"]
    total = np.zeros(state.shape[0])
    for n in range(state.shape[1] - 1):
        dt = t[n + 1] - t[n]
        cur, nxt = state[:, n], state[:, n + 1]
        if np.any(cur[..., 0] <= 0) or np.any(cur[..., 2] <= 0):
            raise MetricError("Rankine-Hugoniot defect needs positive density and pressure")
        F = ns_face_flux(cur[..., 0], cur[..., 1], cur[..., 2], gamma, eta, zeta, dx)
        for Uc, Un, Fc in zip(ns_conserved(cur, gamma), ns_conserved(nxt, gamma), F):
            total += np.sum(np.abs((Un - Uc) / dt + (Fc - np.roll(Fc, 1, axis=-1)) / dx), axis=-1)
    return total


def _navier_stokes(task, u, grid, u0):
    if u.ndim != 4 or u.shape[-1] != 3:
        raise MetricError("navier_stokes metrics need density, velocity and pressure components")
    dx = grid.dx
    gamma = task.params["gamma"]
    rho, m, E = ns_conserved(u, gamma)
    rho0, m0, E0 = ns_conserved(u0, gamma)
    mass_drift = _relative_drift(_integral(rho, dx), _integral(rho0, dx))
    mom_num = np.abs(_integral(m, dx) - _integral(m0, dx)[:, None])
    mom_den = _integral(np.abs(m0), dx)
    mom_drift = mom_num / np.where(mom_den == 0, 1.0, mom_den)[:, None]
    energy_drift = _relative_drift(_integral(E, dx), _integral(E0, dx))
    positivity = np.sum(np.abs(np.minimum(0.0, u[..., 0])) + np.abs(np.minimum(0.0, u[..., 2])), axis=-1) * dx
    sigma = _ns_entropy_total(u, gamma, dx)
    production = sigma[:, -1] - sigma[:, 0]
    violation = np.sum(np.maximum(0.0, -np.diff(sigma, axis=1)), axis=1)
    records = [
        _batch_record("navier_stokes.mass_drift", mass_drift.max(axis=1)),
        _batch_record("navier_stokes.momentum_drift", mom_drift.max(axis=1)),
        _batch_record("navier_stokes.energy_drift", energy_drift.max(axis=1)),
        _batch_record("navier_stokes.positivity", positivity.max(axis=1)),
        _batch_record("navier_stokes.entropy_production", production, signed=True),
        _batch_record("navier_stokes.entropy_violation", violation),
    ]
    if positivity.max() == 0:
        records.append(
            _batch_record("navier_stokes.rh_defect", rankine_hugoniot_defect(u, grid.t_array(), task.params, dx))
        )
    return records


# --- darcy -----------------------------------------------------------------

def _cell_gradients(u, h):
    """Central cell gradients using the ghost value -u outside the domain."""
    pad = np.pad(u, 1)
    pad[0, 1:-1], pad[-1, 1:-1] = -u[0], -u[-1]
    pad[1:-1, 0], pad[1:-1, -1] = -u[:, 0], -u[:, -1]
    gx = (pad[2:, 1:-1] - pad[:-2, 1:-1]) / (2 * h)
    gy = (pad[1:-1, 2:] - pad[1:-1, :-2]) / (2 * h)
    return gx, gy


def darcy_estimators(u, a, beta, h):
    """Return (eta, local mass balance, global compatibility) for one sample."""
    r = beta - (darcy_operator(a, h) @ u.ravel()).reshape(u.shape)
    gx, gy = _cell_gradients(u, h)
    jx = a[:-1] * gx[:-1] - a[1:] * gx[1:]  # interior x-faces
    jy = a[:, :-1] * gy[:, :-1] - a[:, 1:] * gy[:, 1:]
    # every interior face is seen from both neighbouring cells
    eta2 = np.sum(h**2 * r**2 * h**2) + 2.0 * (np.sum(h * jx**2 * h) + np.sum(h * jy**2 * h))
    local = np.sum(np.abs(r)) * h**2
    # boundary face flux a*(0 - u_K)/(h/2) integrated over a face of length h
    edge = np.sum(a[0] * u[0]) + np.sum(a[-1] * u[-1]) + np.sum(a[:, 0] * u[:, 0]) + np.sum(a[:, -1] * u[:, -1])
    outward = -2.0 * edge
    area = (u.shape[0] * h) * (u.shape[1] * h)
    glob = abs(beta * area + outward)
    return float(np.sqrt(eta2)), float(local), float(glob)


def _darcy(task, u, grid, a):
    if a is None:
        raise MetricError("darcy metrics need the coefficient field")
    a = as_array(a)
    beta = task.params["beta_source"]
    rows = [darcy_estimators(ub, ab, beta, grid.dx) for ub, ab in zip(u, a)]
    eta, local, glob = (list(col) for col in zip(*rows)) if rows else ([], [], [])
    return [
        _batch_record("darcy.eta_estimator", eta, faces="interior"),
        _batch_record("darcy.local_mass_balance", local),
        _batch_record("darcy.global_compatibility", glob),
    ]


def invariant_metrics(task: PdeTask, fld, grid: GridSpec, ref0=None, config: Mapping[str, Any] | None = None) -> list[FeedbackRecord]:
    """All PDE-specific metrics applicable to `task`.

    `ref0` is the initial slice for drift metrics (the coefficient field for
    darcy). Defaults to the field's own first slice for time-dependent tasks.
    """
    config = dict(config or {})
    u = as_array(fld)
    tid = task.task_id
    if tid == "darcy":
        return _darcy(task, u, grid, ref0 if ref0 is not None else config.get("coefficient"))
    u0 = as_array(ref0) if ref0 is not None else u[:, 0]
    records = [ic_mismatch(u, u0, grid.dx)] if ref0 is not None else []
    if tid == "advection":
        records += _advection(task, u, grid, u0)
    elif tid == "burgers":
        records += _burgers(task, u, grid, u0)
    elif tid == "reaction_diffusion":
        records += _reaction_diffusion(task, u, grid, u0, config)
    else:
        records += _navier_stokes(task, u, grid, u0)
    return records
