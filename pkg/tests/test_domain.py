import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdeforge.domain import (
    TASK_IDS,
    GridSpec,
    SolutionField,
    TaskError,
    expected_output_shape,
    make_grid,
    registry_get,
    registry_manifest,
    sample_initial_conditions,
    tensor_roundtrip,
)


def test_registry_defaults():
    rd = registry_get("reaction_diffusion")
    assert dict(rd.params) == {"nu": 0.5, "rho": 1.0}
    assert rd.boundary == "periodic" and rd.time_dependent
    darcy = registry_get("darcy")
    assert darcy.spatial_dim == 2 and not darcy.time_dependent
    assert darcy.boundary == "dirichlet_zero"


def test_registry_overrides_and_errors():
    assert registry_get("burgers", {"nu": 0.1}).params["nu"] == 0.1
    with pytest.raises(TaskError):
        registry_get("heat")
    with pytest.raises(TaskError):
        registry_get("burgers", {"rho": 1.0})
    with pytest.raises(TaskError):
        registry_get("burgers", {"nu": -1.0})
    with pytest.raises(TaskError):
        registry_get("navier_stokes", {"gamma": 1.0})


def test_params_are_read_only():
    task = registry_get("advection")
    with pytest.raises(TypeError):
        task.params["beta"] = 3.0


def test_manifest_lists_every_task():
    data = json.loads(registry_manifest())
    assert [t["task_id"] for t in data["tasks"]] == list(TASK_IDS)


def test_grid_spacing():
    task = registry_get("reaction_diffusion")
    grid = make_grid(task, 256, 10, t_end=1.0)
    assert grid.dx * grid.N == pytest.approx(1.0)
    assert grid.dx == 1 / 256
    assert len(grid.t_coordinates) == 11 and grid.t_coordinates[-1] == 1.0
    assert GridSpec.from_dict(grid.to_dict()) == grid


def test_grid_errors():
    with pytest.raises(TaskError):
        make_grid(registry_get("darcy"), 16, 4)
    with pytest.raises(TaskError):
        make_grid(registry_get("burgers"), 16)
    with pytest.raises(TaskError):
        make_grid(registry_get("burgers"), 4, 2)


@pytest.mark.parametrize("tid", TASK_IDS)
def test_sampler_is_deterministic_and_bounded(tid):
    task = registry_get(tid)
    grid = make_grid(task, 32, 2) if task.time_dependent else make_grid(task, 16)
    a = sample_initial_conditions(task, grid, 3, seed=7)
    b = sample_initial_conditions(task, grid, 3, seed=7)
    c = sample_initial_conditions(task, grid, 3, seed=8)
    np.testing.assert_array_equal(a.data, b.data)
    assert not np.array_equal(a.data, c.data)
    assert a.is_finite
    if tid == "reaction_diffusion":
        assert np.all((a.data > 0) & (a.data < 1))
    if tid == "darcy":
        assert np.all(a.data > 0)
    if tid == "navier_stokes":
        assert np.all(a.data[..., 0] > 0) and np.all(a.data[..., 2] > 0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 4), st.sampled_from([16, 24, 40]))
def test_reaction_diffusion_samples_stay_in_unit_interval(seed, batch, n):
    task = registry_get("reaction_diffusion")
    u = sample_initial_conditions(task, make_grid(task, n, 1), batch, seed).data
    assert u.shape == (batch, n)
    assert np.all((u > 0) & (u < 1))


def test_expected_shapes():
    assert expected_output_shape(registry_get("burgers"), make_grid(registry_get("burgers"), 16, 5), 2) == (2, 6, 16)
    ns = registry_get("navier_stokes")
    assert expected_output_shape(ns, make_grid(ns, 16, 3), 2) == (2, 4, 16, 3)
    d = registry_get("darcy")
    assert expected_output_shape(d, make_grid(d, 8), 2) == (2, 8, 8)


def test_field_roundtrip(tmp_path):
    f = SolutionField(np.linspace(0, 1, 12).reshape(2, 6), ("u",))
    g = tensor_roundtrip(f, tmp_path / "f.pdet")
    np.testing.assert_array_equal(f.data, g.data)
