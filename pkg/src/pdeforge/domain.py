"""PDE task registry, grids, solution tensors and initial-condition sampling."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from . import tensorio

TASK_IDS = ("advection", "burgers", "reaction_diffusion", "navier_stokes", "darcy")

REQUIRED_PARAMS = {
    "advection": ("beta",),
    "burgers": ("nu",),
    "reaction_diffusion": ("nu", "rho"),
    "navier_stokes": ("eta", "zeta", "gamma"),
    "darcy": ("beta_source",),
}

DEFAULT_PARAMS = {
    "advection": {"beta": 0.1},
    "burgers": {"nu": 0.01},
    "reaction_diffusion": {"nu": 0.5, "rho": 1.0},
    "navier_stokes": {"eta": 0.1, "zeta": 0.1, "gamma": 5.0 / 3.0},
    "darcy": {"beta_source": 1.0},
}

# must be strictly positive when supplied
_POSITIVE = {"nu", "eta", "zeta"}

DEFAULT_T_END = {
    "advection": 2.0,
    "burgers": 1.0,
    "reaction_diffusion": 1.0,
    "navier_stokes": 1.0,
}

NS_COMPONENTS = ("density", "velocity", "pressure")


class TaskError(ValueError):
    pass


@dataclass(frozen=True)
class PdeTask:
    task_id: str
    params: Mapping[str, float]
    domain: tuple[tuple[float, float], ...]
    boundary: str
    time_dependent: bool
    description_template: str
    solver_signature: tuple[tuple[str, str], ...]
    output_contract: str

    def __post_init__(self):
        if self.task_id not in TASK_IDS:
            raise TaskError(f"unknown task {self.task_id!r}")
        required = set(REQUIRED_PARAMS[self.task_id])
        got = set(self.params)
        if got != required:
            raise TaskError(
                f"{self.task_id} needs params {sorted(required)}, got {sorted(got)}"
            )
        for name, value in self.params.items():
            if not math.isfinite(value):
                raise TaskError(f"param {name} must be finite")
            if name in _POSITIVE and value <= 0:
                raise TaskError(f"param {name} must be positive, got {value}")
        if self.task_id == "navier_stokes" and self.params["gamma"] <= 1:
            raise TaskError("gamma must exceed 1")
        object.__setattr__(self, "params", MappingProxyType(dict(self.params)))

    @property
    def spatial_dim(self) -> int:
        return len(self.domain)

    @property
    def lengths(self) -> tuple[float, ...]:
        return tuple(b - a for a, b in self.domain)

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "spatial_dim": self.spatial_dim,
            "params": dict(self.params),
            "domain": [list(ab) for ab in self.domain],
            "boundary": self.boundary,
            "time_dependent": self.time_dependent,
            "description_template": self.description_template,
            "solver_signature": [list(s) for s in self.solver_signature],
            "output_contract": self.output_contract,
        }


_SIGNATURES = {
    "advection": (("u0_batch", "tensor[batch,N]"), ("t_coordinate", "tensor[T+1]"), ("beta", "scalar")),
    "burgers": (("u0_batch", "tensor[batch,N]"), ("t_coordinate", "tensor[T+1]"), ("nu", "scalar")),
    "reaction_diffusion": (
        ("u0_batch", "tensor[batch,N]"),
        ("t_coordinate", "tensor[T+1]"),
        ("nu", "scalar"),
        ("rho", "scalar"),
    ),
    "navier_stokes": (
        ("Vx0", "tensor[batch,N]"),
        ("density0", "tensor[batch,N]"),
        ("pressure0", "tensor[batch,N]"),
        ("t_coordinate", "tensor[T+1]"),
        ("eta", "scalar"),
        ("zeta", "scalar"),
    ),
    "darcy": (("a", "tensor[batch,N,N]"), ("beta", "scalar")),
}

_OUTPUTS = {
    "advection": "[batch, T+1, N]",
    "burgers": "[batch, T+1, N]",
    "reaction_diffusion": "[batch, T+1, N]",
    "navier_stokes": "[batch, T+1, N, 3] (density, velocity, pressure)",
    "darcy": "[batch, N, N]",
}


def registry_get(task_id: str, overrides: Mapping[str, float] | None = None) -> PdeTask:
    if task_id not in TASK_IDS:
        raise TaskError(f"unknown task {task_id!r}; choose from {TASK_IDS}")
    params = dict(DEFAULT_PARAMS[task_id])
    for name, value in (overrides or {}).items():
        if name not in params:
            raise TaskError(f"{task_id} has no parameter {name!r}")
        params[name] = float(value)
    if task_id == "navier_stokes":
        domain = ((-1.0, 1.0),)
    elif task_id == "darcy":
        domain = ((0.0, 1.0), (0.0, 1.0))
    else:
        domain = ((0.0, 1.0),)
    steady = task_id == "darcy"
    return PdeTask(
        task_id=task_id,
        params=params,
        domain=domain,
        boundary="dirichlet_zero" if steady else "periodic",
        time_dependent=not steady,
        description_template=f"descriptions/{task_id}.txt",
        solver_signature=_SIGNATURES[task_id],
        output_contract=_OUTPUTS[task_id],
    )


def registry_manifest() -> str:
    """JSON listing of every task with default parameters."""
    entries = []
    for tid in TASK_IDS:
        t = registry_get(tid)
        entries.append(
            {"task_id": tid, "params": dict(t.params), "domain": [list(d) for d in t.domain], "boundary": t.boundary}
        )
    return json.dumps({"tasks": entries}, indent=2, sort_keys=True)


@dataclass(frozen=True)
class GridSpec:
    points_per_axis: tuple[int, ...]
    dx_per_axis: tuple[float, ...]
    t_coordinates: tuple[float, ...] = ()

    @property
    def N(self) -> int:
        return self.points_per_axis[0]

    @property
    def dx(self) -> float:
        return self.dx_per_axis[0]

    @property
    def T(self) -> int:
        return max(len(self.t_coordinates) - 1, 0)

    def t_array(self) -> np.ndarray:
        return np.asarray(self.t_coordinates, dtype=np.float64)

    def to_dict(self) -> dict:
        return {
            "points_per_axis": list(self.points_per_axis),
            "dx_per_axis": list(self.dx_per_axis),
            "t_coordinates": list(self.t_coordinates),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "GridSpec":
        return cls(
            tuple(int(n) for n in d["points_per_axis"]),
            tuple(float(x) for x in d["dx_per_axis"]),
            tuple(float(t) for t in d.get("t_coordinates", ())),
        )


def make_grid(task: PdeTask, N: int | Sequence[int], T: int | None = None, t_end: float | None = None) -> GridSpec:
    ns = [int(N)] * task.spatial_dim if np.isscalar(N) else [int(n) for n in N]
    if len(ns) != task.spatial_dim:
        raise TaskError(f"{task.task_id} is {task.spatial_dim}D, got {len(ns)} axis sizes")
    if any(n < 8 for n in ns):
        raise TaskError("need at least 8 points per axis")
    dxs = tuple(length / n for length, n in zip(task.lengths, ns))
    if not task.time_dependent:
        if T is not None:
            raise TaskError(f"{task.task_id} is steady; T must not be given")
        return GridSpec(tuple(ns), dxs, ())
    if T is None or T < 1:
        raise TaskError("time-dependent tasks need T >= 1")
    if t_end is None:
        t_end = DEFAULT_T_END[task.task_id]
    if not t_end > 0:
        raise TaskError("t_end must be positive")
    ts = np.linspace(0.0, float(t_end), int(T) + 1)
    return GridSpec(tuple(ns), dxs, tuple(float(t) for t in ts))


def node_coordinates(task: PdeTask, grid: GridSpec, axis: int = 0) -> np.ndarray:
    """Periodic tasks sample at x_i = a + i*dx; Darcy uses cell centres."""
    a, _ = task.domain[axis]
    i = np.arange(grid.points_per_axis[axis], dtype=np.float64)
    if task.task_id == "darcy":
        return a + (i + 0.5) * grid.dx_per_axis[axis]
    return a + i * grid.dx_per_axis[axis]


@dataclass(frozen=True)
class SolutionField:
    data: np.ndarray
    component_names: tuple[str, ...] = ("u",)

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, order="C", copy=True)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "component_names", tuple(self.component_names))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def batch(self) -> int:
        return self.data.shape[0]

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.data).all())


def expected_output_shape(task: PdeTask, grid: GridSpec, batch: int) -> tuple[int, ...]:
    if task.task_id == "darcy":
        return (batch, *grid.points_per_axis)
    shape = (batch, grid.T + 1, grid.N)
    if task.task_id == "navier_stokes":
        shape += (3,)
    return shape


def tensor_roundtrip(fld: SolutionField, path) -> SolutionField:
    tensorio.store(fld.data, path)
    return SolutionField(tensorio.load(path), fld.component_names)


# --- initial conditions ---------------------------------------------------

N_MODES = 8


def fourier_coefficients(rng: np.random.Generator, batch: int, modes: int = N_MODES):
    """Amplitudes 1/k and uniform phases for modes 1..modes, normalised so the
    series is bounded by 1 in absolute value."""
    k = np.arange(1, modes + 1, dtype=np.float64)
    amp = (1.0 / k) / np.sum(1.0 / k)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(batch, modes))
    return np.broadcast_to(amp, (batch, modes)).copy(), phases


def fourier_series(amp: np.ndarray, phases: np.ndarray, N: int, mean=0.0) -> np.ndarray:
    """Evaluate mean + sum_k amp_k cos(2 pi k i/N + phase_k) on N periodic
    nodes via an inverse FFT of the Hermitian spectrum."""
    batch, modes = amp.shape
    if modes >= N // 2:
        raise TaskError(f"{modes} modes need N > {2 * modes}")
    spec = np.zeros((batch, N), dtype=np.complex128)
    spec[:, 0] = N * np.broadcast_to(mean, (batch,))
    c = 0.5 * N * amp * np.exp(1j * phases)
    spec[:, 1 : modes + 1] = c
    spec[:, N - modes :] = np.conj(c[:, ::-1])
    u = np.fft.ifft(spec, axis=-1)
    residue = np.max(np.abs(u.imag)) if u.size else 0.0
    scale = max(1.0, float(np.max(np.abs(u.real))) if u.size else 1.0)
    if residue > 1e-12 * scale:
        raise AssertionError(f"imaginary residue {residue}")
    return u.real.copy()


def sample_initial_conditions(task: PdeTask, grid: GridSpec, batch: int, seed: int) -> SolutionField:
    if batch < 0:
        raise TaskError("batch must be non-negative")
    rng = np.random.default_rng([int(seed), TASK_IDS.index(task.task_id)])
    tid = task.task_id
    if tid == "darcy":
        return SolutionField(_darcy_coefficient(rng, grid, batch), ("a",))
    N = grid.N
    modes = min(N_MODES, N // 2 - 1)
    if tid in ("advection", "burgers"):
        mean = rng.uniform(0.2, 0.8, size=batch)
        amp, ph = fourier_coefficients(rng, batch, modes)
        return SolutionField(fourier_series(0.5 * amp, ph, N, mean), ("u",))
    if tid == "reaction_diffusion":
        amp, ph = fourier_coefficients(rng, batch, modes)
        s = fourier_series(2.0 * amp, ph, N)
        return SolutionField(1.0 / (1.0 + np.exp(-s)), ("u",))
    # navier_stokes: components last
    out = np.empty((batch, N, 3))
    for c, (base, scale) in enumerate(((1.0, 0.3), (0.0, 0.2), (1.0, 0.3))):
        amp, ph = fourier_coefficients(rng, batch, modes)
        out[..., c] = fourier_series(scale * amp, ph, N, base)
    return SolutionField(out, NS_COMPONENTS)


def _darcy_coefficient(rng, grid: GridSpec, batch: int) -> np.ndarray:
    nx, ny = grid.points_per_axis
    x = (np.arange(nx) + 0.5) / nx
    y = (np.arange(ny) + 0.5) / ny
    X, Y = np.meshgrid(x, y, indexing="ij")
    ks = [(k1, k2) for k1 in range(0, 5) for k2 in range(-4, 5) if (k1, k2) > (0, 0)]
    out = np.empty((batch, nx, ny))
    for b in range(batch):
        s = np.zeros((nx, ny))
        phases = rng.uniform(0, 2 * np.pi, size=len(ks))
        weights = rng.normal(size=len(ks))
        for (k1, k2), ph, w in zip(ks, phases, weights):
            s += w / math.hypot(k1, k2) * np.cos(2 * np.pi * (k1 * X + k2 * Y) + ph)
        out[b] = np.where(s > 0.0, 12.0, 3.0)
    return out
