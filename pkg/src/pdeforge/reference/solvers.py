"""Desk-scale reference solvers for the five tasks.

Periodic tasks live on nodes x_i = a + i*dx. Oversampled runs are prolonged
by Fourier interpolation and restricted by trapezoid full weighting, which
keeps the discrete mean and stays inside the range of the fine values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..domain import GridSpec, NS_COMPONENTS, PdeTask, SolutionField
from .stability import dt_max_advective, dt_max_diffusion, reaction_exact_step, substeps

ADVECTION_SCHEMES = ("exact_spectral", "second_order_fv")

DEFAULT_SCHEMES = {
    "advection": "exact_spectral",
    "burgers": "rusanov_fv",
    "reaction_diffusion": "strang_exact_reaction",
    "navier_stokes": "rusanov_fv_viscous",
    "darcy": "five_point_direct",
}

DEFAULT_OVERSAMPLE = {"navier_stokes": 4}


class InstabilityError(RuntimeError):
    def __init__(self, task_id: str, step: int, t: float):
        super().__init__(f"{task_id} reference went non-finite at internal step {step} (t={t:.6g})")
        self.step = step
        self.t = t


@dataclass(frozen=True)
class ReferenceConfig:
    oversample_factor: int | None = None
    safety_fraction: float = 1.0
    cfl: float = 0.5
    scheme: str | None = None

    def __post_init__(self):
        if self.oversample_factor is not None and self.oversample_factor < 1:
            raise ValueError("oversample_factor must be >= 1")
        if not 0 < self.safety_fraction <= 1:
            raise ValueError("safety_fraction must be in (0, 1]")
        if not 0 < self.cfl <= 1:
            raise ValueError("cfl must be in (0, 1]")

    def scheme_for(self, task_id: str) -> str:
        if self.scheme is None:
            return DEFAULT_SCHEMES[task_id]
        if task_id == "advection" and self.scheme not in ADVECTION_SCHEMES:
            raise ValueError(f"advection scheme must be one of {ADVECTION_SCHEMES}")
        return self.scheme

    def oversample_for(self, task_id: str) -> int:
        if self.oversample_factor is not None:
            return self.oversample_factor
        return DEFAULT_OVERSAMPLE.get(task_id, 1)


def fourier_prolong(u: np.ndarray, factor: int, axis: int = -1) -> np.ndarray:
    if factor == 1:
        return np.array(u, dtype=np.float64)
    n = u.shape[axis]
    spec = np.fft.rfft(u, axis=axis)
    if n % 2 == 0:
        # split the Nyquist coefficient so the interpolant stays real
        idx = [slice(None)] * u.ndim
        idx[axis] = n // 2
        spec[tuple(idx)] *= 0.5
    m = n * factor
    shape = list(spec.shape)
    shape[axis] = m // 2 + 1
    padded = np.zeros(shape, dtype=np.complex128)
    idx = [slice(None)] * u.ndim
    idx[axis] = slice(0, spec.shape[axis])
    padded[tuple(idx)] = spec
    return np.fft.irfft(padded, n=m, axis=axis) * factor


def full_weighting(u: np.ndarray, factor: int, axis: int = -1) -> np.ndarray:
    """Restrict fine periodic nodes to every `factor`-th node with trapezoid
    weights; a convex combination that preserves the discrete mean."""
    if factor == 1:
        return np.array(u, dtype=np.float64)
    u = np.moveaxis(np.asarray(u, dtype=np.float64), axis, -1)
    half = factor // 2
    if factor % 2:
        offsets = range(-half, half + 1)
        weights = [1.0 / factor] * factor
    else:
        offsets = range(-half, half + 1)
        weights = [0.5 / factor] + [1.0 / factor] * (factor - 1) + [0.5 / factor]
    acc = np.zeros_like(u)
    for o, w in zip(offsets, weights):
        acc += w * np.roll(u, -o, axis=-1)
    return np.moveaxis(acc[..., ::factor], -1, axis)


def _check(arr, task_id, step, t):
    if not np.isfinite(arr).all():
        raise InstabilityError(task_id, step, t)


# --- advection -----------------------------------------------------------

def advection_exact(u0: np.ndarray, t: np.ndarray, beta: float, length: float = 1.0) -> np.ndarray:
    u0 = np.asarray(u0, dtype=np.float64)
    n = u0.shape[-1]
    spec = np.fft.rfft(u0, axis=-1)
    k = 2.0 * np.pi * np.fft.rfftfreq(n, d=length / n)
    phase = np.exp(-1j * np.outer(np.asarray(t) * beta, k))  # [T+1, K]
    out = np.fft.irfft(spec[:, None, :] * phase[None], n=n, axis=-1)
    out[:, 0, :] = u0
    return out


def _minmod(a, b):
    return np.where(a * b > 0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def advection_muscl_rhs(u, beta, dx):
    du_r = np.roll(u, -1, axis=-1) - u
    du_l = u - np.roll(u, 1, axis=-1)
    slope = _minmod(du_l, du_r)
    if beta >= 0:
        face = u + 0.5 * slope  # value at i+1/2 from the left
    else:
        face = np.roll(u - 0.5 * slope, -1, axis=-1)
    flux = beta * face
    return -(flux - np.roll(flux, 1, axis=-1)) / dx


def advection_fv(u0, t, beta, dx, cfl=0.5, task_id="advection"):
    u = np.array(u0, dtype=np.float64)
    out = np.empty((u.shape[0], len(t), u.shape[-1]))
    out[:, 0] = u
    dt_s = dt_max_advective(dx, abs(beta), cfl)
    step = 0
    for i in range(1, len(t)):
        n, dt = substeps(t[i] - t[i - 1], dt_s)
        for _ in range(n):
            u1 = u + dt * advection_muscl_rhs(u, beta, dx)
            u = 0.5 * (u + u1 + dt * advection_muscl_rhs(u1, beta, dx))
            step += 1
            _check(u, task_id, step, t[i])
        out[:, i] = u
    return out


# --- burgers -------------------------------------------------------------

def burgers_rusanov_step(u, dt, dx, nu):
    ur = np.roll(u, -1, axis=-1)
    alpha = np.maximum(np.abs(u), np.abs(ur))
    flux = 0.25 * (u * u + ur * ur) - 0.5 * alpha * (ur - u)
    adv = (flux - np.roll(flux, 1, axis=-1)) / dx
    lap = (ur - 2.0 * u + np.roll(u, 1, axis=-1)) / dx**2
    return u - dt * adv + dt * nu * lap


def burgers_reference(u0, t, nu, dx, safety=0.9):
    u = np.array(u0, dtype=np.float64)
    out = np.empty((u.shape[0], len(t), u.shape[-1]))
    out[:, 0] = u
    step = 0
    for i in range(1, len(t)):
        # dt*max|u|/dx + 2*nu*dt/dx^2 <= 1 keeps the update a convex combination
        umax = float(np.max(np.abs(u))) if u.size else 0.0
        dt_s = safety / (umax / dx + 2.0 * nu / dx**2)
        n, dt = substeps(t[i] - t[i - 1], dt_s)
        for _ in range(n):
            u = burgers_rusanov_step(u, dt, dx, nu)
            step += 1
            _check(u, "burgers", step, t[i])
        out[:, i] = u
    return out


# --- reaction-diffusion --------------------------------------------------

def diffusion_explicit_step(u, dt, dx, nu):
    return u + nu * dt / dx**2 * (np.roll(u, -1, axis=-1) - 2.0 * u + np.roll(u, 1, axis=-1))


def reaction_diffusion_reference(u0, t, nu, rho, dx, safety=1.0, splitting="strang"):
    u = np.array(u0, dtype=np.float64)
    out = np.empty((u.shape[0], len(t), u.shape[-1]))
    out[:, 0] = u
    dt_s = dt_max_diffusion(dx, nu, safety)
    step = 0
    for i in range(1, len(t)):
        n, dt = substeps(t[i] - t[i - 1], dt_s)
        for _ in range(n):
            if splitting == "strang":
                u = reaction_exact_step(u, 0.5 * dt, rho)
                u = diffusion_explicit_step(u, dt, dx, nu)
                u = reaction_exact_step(u, 0.5 * dt, rho)
            else:
                u = reaction_exact_step(u, dt, rho)
                u = diffusion_explicit_step(u, dt, dx, nu)
            step += 1
            _check(u, "reaction_diffusion", step, t[i])
        out[:, i] = u
    return out


# --- compressible navier-stokes ------------------------------------------

def ns_primitive_to_conserved(rho, v, p, gamma):
    return rho, rho * v, p / (gamma - 1.0) + 0.5 * rho * v * v


def ns_conserved_to_primitive(rho, m, E, gamma):
    v = m / rho
    p = (gamma - 1.0) * (E - 0.5 * rho * v * v)
    return rho, v, p


def ns_face_flux(rho, v, p, gamma, eta, zeta, dx):
    """Rusanov inviscid flux plus central viscous flux at faces i+1/2.

    Returns three arrays (mass, momentum, energy) with face i+1/2 at index i.
    """
    _, m, E = ns_primitive_to_conserved(rho, v, p, gamma)
    c = np.sqrt(gamma * p / rho)
    R = lambda a: np.roll(a, -1, axis=-1)
    f_mass = m
    f_mom = m * v + p
    f_en = (E + p) * v
    alpha = np.maximum(np.abs(v) + c, R(np.abs(v) + c))
    mu = zeta + 4.0 * eta / 3.0
    sigma = mu * (R(v) - v) / dx
    v_face = 0.5 * (v + R(v))
    F0 = 0.5 * (f_mass + R(f_mass)) - 0.5 * alpha * (R(rho) - rho)
    F1 = 0.5 * (f_mom + R(f_mom)) - 0.5 * alpha * (R(m) - m) - sigma
    F2 = 0.5 * (f_en + R(f_en)) - 0.5 * alpha * (R(E) - E) - v_face * sigma
    return F0, F1, F2


def navier_stokes_reference(state0, t, eta, zeta, gamma, dx, cfl=0.5, task_id="navier_stokes"):
    """state0: [batch, N, 3] with (density, velocity, pressure)."""
    rho, v, p = (np.array(state0[..., c], dtype=np.float64) for c in range(3))
    U = list(ns_primitive_to_conserved(rho, v, p, gamma))
    out = np.empty((rho.shape[0], len(t), rho.shape[-1], 3))
    out[:, 0] = state0
    mu = zeta + 4.0 * eta / 3.0
    step = 0
    for i in range(1, len(t)):
        cur, target = float(t[i - 1]), float(t[i])
        while cur < target:
            rho, v, p = ns_conserved_to_primitive(*U, gamma)
            lam = float(np.max(np.abs(v) + np.sqrt(gamma * p / rho)))
            dt = min(cfl * dx / lam, 0.25 * dx * dx * float(np.min(rho)) / mu)
            if cur + dt >= target:
                dt = target - cur
                cur = target
            else:
                cur += dt
            F = ns_face_flux(rho, v, p, gamma, eta, zeta, dx)
            U = [Uc - dt / dx * (Fc - np.roll(Fc, 1, axis=-1)) for Uc, Fc in zip(U, F)]
            step += 1
            _check(U[2], task_id, step, cur)
            if np.any(U[0] <= 0):
                raise InstabilityError(task_id, step, cur)
        rho, v, p = ns_conserved_to_primitive(*U, gamma)
        out[:, i] = np.stack([rho, v, p], axis=-1)
    return out


# --- darcy ---------------------------------------------------------------

def darcy_operator(a: np.ndarray, h: float) -> sp.csr_matrix:
    """Matrix of -div(a grad u) on cell centres with u = 0 on the boundary
    (ghost value -u_K), harmonic-mean face coefficients."""
    nx, ny = a.shape
    idx = np.arange(nx * ny).reshape(nx, ny)
    diag = np.zeros((nx, ny))
    rows, cols, vals = [], [], []
    for axis in (0, 1):
        lo = [slice(None)] * 2
        hi = [slice(None)] * 2
        lo[axis] = slice(0, -1)
        hi[axis] = slice(1, None)
        aL, aR = a[tuple(lo)], a[tuple(hi)]
        af = 2.0 * aL * aR / (aL + aR) / h**2
        diag[tuple(lo)] += af
        diag[tuple(hi)] += af
        iL, iR = idx[tuple(lo)].ravel(), idx[tuple(hi)].ravel()
        rows += [iL, iR]
        cols += [iR, iL]
        vals += [-af.ravel(), -af.ravel()]
        # boundary faces at the two ends of this axis
        first = [slice(None)] * 2
        last = [slice(None)] * 2
        first[axis] = 0
        last[axis] = -1
        diag[tuple(first)] += 2.0 * a[tuple(first)] / h**2
        diag[tuple(last)] += 2.0 * a[tuple(last)] / h**2
    rows.append(idx.ravel())
    cols.append(idx.ravel())
    vals.append(diag.ravel())
    n = nx * ny
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))


def darcy_reference(a_batch: np.ndarray, beta: float, h: float) -> np.ndarray:
    out = np.empty_like(a_batch, dtype=np.float64)
    for b, a in enumerate(np.asarray(a_batch, dtype=np.float64)):
        A = darcy_operator(a, h).tocsc()
        rhs = np.full(a.size, float(beta))
        out[b] = spla.spsolve(A, rhs).reshape(a.shape)
    _check(out, "darcy", 0, 0.0)
    return out


def darcy_boundary_trace(u: np.ndarray) -> np.ndarray:
    """Face-midpoint values on the boundary implied by the ghost-cell closure."""
    u = np.asarray(u)
    sides = [u[..., 0, :], u[..., -1, :], u[..., :, 0], u[..., :, -1]]
    return np.concatenate([0.5 * (s + (-s)) for s in sides], axis=-1)


# --- dispatch ------------------------------------------------------------

def solve_reference(task: PdeTask, grid: GridSpec, inputs: SolutionField | np.ndarray, cfg: ReferenceConfig | None = None) -> SolutionField:
    cfg = cfg or ReferenceConfig()
    data = np.asarray(inputs.data if isinstance(inputs, SolutionField) else inputs, dtype=np.float64)
    tid = task.task_id
    scheme = cfg.scheme_for(tid)
    P = task.params
    if tid == "darcy":
        if data.shape[1:] != tuple(grid.points_per_axis):
            raise ValueError(f"coefficient shape {data.shape} does not match grid {grid.points_per_axis}")
        return SolutionField(darcy_reference(data, P["beta_source"], grid.dx), ("u",))

    t = grid.t_array()
    factor = cfg.oversample_for(tid)
    dx_f = grid.dx / factor
    expected = (grid.N, 3) if tid == "navier_stokes" else (grid.N,)
    if data.shape[1:] != expected:
        raise ValueError(f"input shape {data.shape} does not match grid {expected}")

    if tid == "advection":
        if scheme == "exact_spectral":
            out = advection_exact(data, t, P["beta"], task.lengths[0])
        else:
            fine = fourier_prolong(data, factor)
            out = full_weighting(advection_fv(fine, t, P["beta"], dx_f, cfg.cfl), factor)
    elif tid == "burgers":
        fine = fourier_prolong(data, factor)
        out = full_weighting(burgers_reference(fine, t, P["nu"], dx_f), factor)
    elif tid == "reaction_diffusion":
        fine = np.clip(fourier_prolong(data, factor), 0.0, 1.0) if factor > 1 else data
        out = full_weighting(
            reaction_diffusion_reference(fine, t, P["nu"], P["rho"], dx_f, cfg.safety_fraction), factor
        )
    else:
        # resample conserved variables so mass, momentum and energy carry over exactly
        gamma = P["gamma"]
        cons = np.stack(ns_primitive_to_conserved(data[..., 0], data[..., 1], data[..., 2], gamma), axis=-1)
        cons = fourier_prolong(cons, factor, axis=1)
        fine = np.stack(ns_conserved_to_primitive(cons[..., 0], cons[..., 1], cons[..., 2], gamma), axis=-1)
        sol = navier_stokes_reference(fine, t, P["eta"], P["zeta"], gamma, dx_f, cfg.cfl)
        cons = np.stack(ns_primitive_to_conserved(sol[..., 0], sol[..., 1], sol[..., 2], gamma), axis=-1)
        cons = full_weighting(cons, factor, axis=2)
        out = np.stack(ns_conserved_to_primitive(cons[..., 0], cons[..., 1], cons[..., 2], gamma), axis=-1)
    out = np.ascontiguousarray(out)
    out[:, 0] = data
    names = NS_COMPONENTS if tid == "navier_stokes" else ("u",)
    return SolutionField(out, names)
