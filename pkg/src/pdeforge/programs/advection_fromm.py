import math

import numpy as np


def rhs(u, beta, dx):
    # unlimited piecewise-linear reconstruction with central slopes (Fromm)
    slope = 0.5 * (np.roll(u, -1, axis=-1) - np.roll(u, 1, axis=-1))
    if beta >= 0:
        face = u + 0.5 * slope
    else:
        face = np.roll(u, -1, axis=-1) - 0.5 * np.roll(slope, -1, axis=-1)
    flux = beta * face
    return -(flux - np.roll(flux, 1, axis=-1)) / dx


def solver(u0_batch, t_coordinate, beta):
    u = np.array(u0_batch, dtype=np.float64)
    batch, N = u.shape
    dx = 1.0 / N
    dt_max = 0.5 * dx / abs(beta) if beta != 0 else math.inf
    print(f"Stability-based dt_max = {dt_max:.2e}")
    T = len(t_coordinate) - 1
    solutions = np.empty((batch, T + 1, N))
    solutions[:, 0] = u
    total = 0
    for i in range(1, T + 1):
        interval = t_coordinate[i] - t_coordinate[i - 1]
        n = 1 if math.isinf(dt_max) else max(1, math.ceil(interval / dt_max - 1e-12))
        dt = interval / n
        for _ in range(n):
            u1 = u + dt * rhs(u, beta, dx)
            u = 0.5 * u + 0.5 * (u1 + dt * rhs(u1, beta, dx))
        total += n
        solutions[:, i] = u
        print(f"Time step {i}/{T} completed (internal steps: {total})")
    return solutions
