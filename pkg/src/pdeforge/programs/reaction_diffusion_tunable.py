import math

import numpy as np

REACTION = "euler"
SPLITTING = "lie"
SAFETY = 1.0


def reaction_step(u, dt, rho):
    if REACTION == "exact":
        return 1.0 / (1.0 + np.exp(-rho * dt) * (1.0 - u) / (u + 1e-10))
    return u + dt * rho * u * (1.0 - u)


def diffusion_step(u, dt, dx, nu):
    return u + nu * dt / dx**2 * (np.roll(u, -1, axis=-1) - 2.0 * u + np.roll(u, 1, axis=-1))


def solver(u0_batch, t_coordinate, nu, rho):
    u = np.array(u0_batch, dtype=np.float64)
    batch, N = u.shape
    dx = 1.0 / N
    dt_max = SAFETY * 0.25 * dx**2 / nu
    print(f"Stability-based dt_max = {dt_max:.2e}")
    T = len(t_coordinate) - 1
    solutions = np.empty((batch, T + 1, N))
    solutions[:, 0] = u
    total = 0
    for i in range(1, T + 1):
        interval = t_coordinate[i] - t_coordinate[i - 1]
        n = max(1, math.ceil(interval / dt_max - 1e-12))
        dt = interval / n
        if i == 1:
            print(f"Using {n} internal time steps")
        for _ in range(n):
            if SPLITTING == "strang":
                u = reaction_step(u, 0.5 * dt, rho)
                u = diffusion_step(u, dt, dx, nu)
                u = reaction_step(u, 0.5 * dt, rho)
            else:
                u = reaction_step(u, dt, rho)
                u = diffusion_step(u, dt, dx, nu)
        total += n
        solutions[:, i] = u
        print(f"Time step {i}/{T} completed (internal steps: {total})")
    return solutions
