"""Stability bounds and the closed-form logistic reaction update."""

from __future__ import annotations

import math

import numpy as np


def reaction_exact_step(u, dt: float, rho: float, eps: float = 1e-10):
    """Exact logistic update for u' = rho*u*(1-u) over dt, written so that
    neither u -> 0 nor u -> 1 cancels or overflows.

    eps only replaces an exactly-zero denominator, so u = 0 maps to a value
    below eps*exp(rho*dt) and every positive u gets the unbiased update.
    """
    u = np.asarray(u, dtype=np.float64)
    return 1.0 / (1.0 + np.exp(-rho * dt) * (1.0 - u) / np.where(u > 0, u, eps))


def reaction_naive_step(u, dt: float, rho: float):
    u = np.asarray(u, dtype=np.float64)
    return u / (u + (1.0 - u) * np.exp(-rho * dt))


def reaction_closed_form(u, dt: float, rho: float):
    u = np.asarray(u, dtype=np.float64)
    g = np.exp(rho * dt)
    return u * g / (1.0 + u * (g - 1.0))


def dt_max_diffusion(dx: float, nu: float, safety: float = 1.0) -> float:
    if not (dx > 0 and nu > 0 and safety > 0):
        raise ValueError("dx, nu and safety must be positive")
    return safety * 0.25 * dx**2 / nu


def dt_max_advective(dx: float, speed: float, cfl: float = 0.5) -> float:
    if not (dx > 0 and cfl > 0):
        raise ValueError("dx and cfl must be positive")
    if speed <= 0:
        return math.inf
    return cfl * dx / speed


def substeps(interval: float, dt_max: float) -> tuple[int, float]:
    """Equal substeps covering `interval` exactly with none above dt_max."""
    if interval <= 0:
        return 0, 0.0
    if not math.isfinite(dt_max):
        return 1, interval
    n = max(1, math.ceil(interval / dt_max - 1e-12))
    return n, interval / n
