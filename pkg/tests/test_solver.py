import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from convexflow import GridSpec, geometry_fields
from convexflow.exact import SphereSolution, scenario, solve_barrier, sphere_cap_graph
from convexflow.solver import (
    ConvexityLost,
    FlowParams,
    Trajectory,
    comparison_run,
    nested_domain_study,
    run,
    scaling_study,
    step,
)

from conftest import sample


def para(n=1, L=1.0, dx=0.05, t_end=0.01, **kw):
    return FlowParams(rho=kw.pop("rho", 1.0), n=n, L=L, dx=dx, t_end=t_end, **kw)


# -- parameters -------------------------------------------------------------------


@pytest.mark.parametrize(
    "kwargs, message",
    [
        (dict(rho=0.0), "rho must be > 0"),
        (dict(n=3), "n must be 1 or 2"),
        (dict(t_end=-1.0), "t_end"),
        (dict(cfl=1.5), "cfl"),
        (dict(boundary="periodic"), "boundary"),
        (dict(boundary="barrier"), "SphereSolution"),
    ],
)
def test_params_validation(kwargs, message):
    base = dict(rho=1.0, n=1, L=1.0, dx=0.1, t_end=0.1) | kwargs
    with pytest.raises(ValueError, match=message):
        FlowParams(**base)


# -- single steps -------------------------------------------------------------------


def test_step_advances_time_by_dt():
    p = para()
    u = scenario("paraboloid", p.grid)
    new, rec = step(u, p, dt=1e-4)
    assert new.t == pytest.approx(1e-4)
    assert rec.t == 0.0 and rec.dt == 1e-4
    assert rec.min_H > 0 and rec.max_speed >= rec.min_H


def test_cap_vertex_rises_by_dt_times_speed():
    s = SphereSolution.resting_on_origin(2.0, 1.0, 1)
    g = GridSpec(1, 0.5, 0.01)
    p = FlowParams(rho=1.0, n=1, L=0.5, dx=0.01, t_end=1.0, boundary="barrier", barrier=s)
    u = sphere_cap_graph(s, 0.0, g)
    dt = 1e-5
    new, _ = step(u, p, dt=dt)
    o = g.origin_index
    # W = 1 at the vertex and H = 1/r0 up to O(dx^2)
    assert new.values[o] - u.values[o] == pytest.approx(dt / 2.0, rel=1e-4)


def test_step_on_affine_data_loses_convexity():
    p = para()
    u = sample(p.grid, lambda x: 0.5 * x[..., 0] + 1.0)
    with pytest.raises(ConvexityLost) as info:
        step(u, p)
    assert info.value.t == 0.0 and len(info.value.node) == 1


def test_cfl_step_obeys_the_bound():
    p = para(n=2, rho=2.0)
    u = scenario("paraboloid", p.grid)
    _, rec = step(u, p)
    f = geometry_fields(u, 2.0)
    inner = p.grid.interior
    coeff = np.max(2.0 * f.W[inner] * f.H[inner] ** 1.0)
    assert rec.dt == pytest.approx(0.9 * p.dx**2 / (4 * coeff), rel=1e-12)


def test_frozen_boundary_holds_values():
    p = para(boundary="frozen")
    u = scenario("paraboloid", p.grid)
    traj = run(u, p)
    end = traj.snapshots[-1].values
    assert end[0] == u.values[0] and end[-1] == u.values[-1]


def test_barrier_boundary_follows_the_cap():
    s = SphereSolution.resting_on_origin(2.0, 1.0, 2)
    p = FlowParams(rho=1.0, n=2, L=0.5, dx=0.05, t_end=0.05, boundary="barrier", barrier=s)
    traj = run(sphere_cap_graph(s, 0.0, p.grid), p)
    cap = sphere_cap_graph(s, 0.05, p.grid).values
    end = traj.snapshots[-1].values
    assert np.allclose(end[0], cap[0], rtol=0, atol=1e-14)
    assert np.max(np.abs(end - cap)) < 1e-4


# -- runs -----------------------------------------------------------------------------


@pytest.mark.parametrize("n", [1, 2])
@pytest.mark.parametrize("rho", [0.5, 1.0, 2.0])
def test_run_is_monotone_in_time(n, rho):
    p = para(n=n, dx=0.1, rho=rho, t_end=0.02)
    traj = run(scenario("paraboloid", p.grid), p, snapshot_every=5)
    for a, b in zip(traj.snapshots, traj.snapshots[1:]):
        assert np.all(b.values >= a.values)
    assert np.all(np.diff(traj.times) > 0)


def test_run_hits_requested_snapshot_times():
    p = para(t_end=0.01)
    traj = run(scenario("paraboloid", p.grid), p, snapshot_times=[0.0025, 0.005])
    assert traj.times.tolist() == [0.0, 0.0025, 0.005, 0.01]
    assert traj.at(0.005).t == 0.005
    with pytest.raises(KeyError):
        traj.at(0.004)
    assert len(traj.records) > 0


def test_run_with_zero_horizon_returns_the_datum():
    p = para(t_end=0.0)
    u = sample(p.grid, lambda x: np.abs(x[..., 0]))
    traj = run(u, p)
    assert len(traj.snapshots) == 1 and traj.snapshots[0] is u


def test_run_rejects_nonconvex_data():
    p = para()
    with pytest.raises(ConvexityLost):
        run(sample(p.grid, lambda x: -x[..., 0] ** 2), p)


def test_run_rejects_mismatched_grid():
    p = para()
    with pytest.raises(ValueError, match="does not match"):
        run(scenario("paraboloid", GridSpec(1, 1.0, 0.1)), p)


def test_runs_are_deterministic():
    p = para(n=2, dx=0.1)
    a = run(scenario("paraboloid", p.grid), p)
    b = run(scenario("paraboloid", p.grid), p)
    assert np.array_equal(a.snapshots[-1].values, b.snapshots[-1].values)
    assert [r.as_row() for r in a.records] == [r.as_row() for r in b.records]


def test_trajectory_snapshots_are_read_only():
    p = para()
    traj = run(scenario("paraboloid", p.grid), p)
    for s in traj.snapshots:
        with pytest.raises(ValueError):
            s.values[0] = 0.0


def test_trajectory_from_snapshots_needs_increasing_times():
    p = para()
    u = scenario("paraboloid", p.grid)
    with pytest.raises(ValueError):
        Trajectory.from_snapshots(p, [u, u])


@pytest.mark.parametrize("n, dx", [(1, 0.02), (2, 0.05)])
def test_shrinking_sphere_tracks_the_exact_cap(n, dx):
    s = SphereSolution.resting_on_origin(2.0, 1.0, n)
    p = FlowParams(rho=1.0, n=n, L=0.5, dx=dx, t_end=0.1, boundary="barrier", barrier=s)
    traj = run(sphere_cap_graph(s, 0.0, p.grid), p)
    err = np.max(np.abs(traj.snapshots[-1].values - sphere_cap_graph(s, 0.1, p.grid).values))
    assert err < 10 * dx**2


# -- comparison -------------------------------------------------------------------------


def test_comparison_against_barrier_sphere():
    b = solve_barrier(1.0, 2.0, 0.1, 1.0, 1)
    p = para(L=0.5, dx=0.02, t_end=0.1)
    rep = comparison_run(scenario("paraboloid", p.grid), b.sphere, p)
    assert rep.passed and rep.max_violation == 0.0
    assert rep.times[0] == 0.0 and rep.times[-1] == pytest.approx(0.1)


@pytest.mark.parametrize("shift", [0.0, 0.1])
def test_comparison_of_ordered_pairs(shift):
    p = para(dx=0.05, t_end=0.02)
    low = scenario("paraboloid", p.grid)
    high = scenario("scaled_paraboloid", p.grid, a=1.1).with_values(
        scenario("scaled_paraboloid", p.grid, a=1.1).values + shift
    )
    rep = comparison_run(low, high, p)
    assert rep.passed
    assert rep.bound == pytest.approx(10 * 0.05**2)


def test_comparison_needs_ordered_data():
    p = para()
    low = scenario("paraboloid", p.grid)
    with pytest.raises(ValueError, match="ordered"):
        comparison_run(low.with_values(low.values + 1), low, p)


# -- nested domains ------------------------------------------------------------------------


def test_single_domain_is_degenerate():
    rep = nested_domain_study("paraboloid", para(), [1.0])
    assert rep.degenerate and rep.differences.size == 0 and rep.decreasing


def test_two_domains_are_degenerate_but_compared():
    rep = nested_domain_study("paraboloid", para(dx=0.05, t_end=0.05), [1.0, 2.0])
    assert rep.degenerate and rep.differences.shape == (1,)


def test_nested_domains_decrease_for_the_paraboloid():
    p = para(dx=0.05, t_end=0.5)
    rep = nested_domain_study("paraboloid", p, [1.0, 1.5, 2.0])
    assert not rep.degenerate
    assert rep.decreasing and rep.differences[0] > 0


def test_nested_domains_with_reference_errors():
    s = SphereSolution.resting_on_origin(2.0, 1.0, 1)
    p = para(dx=0.02, t_end=0.05)
    rep = nested_domain_study(
        "hemisphere", p, [0.4, 0.8, 1.2], r0=2.0,
        reference=lambda t, g: sphere_cap_graph(s, t, g).values,
    )
    assert rep.reference_errors.shape == (3,)
    assert np.all(rep.differences <= rep.reference_errors[:-1] + rep.reference_errors[1:] + 1e-15)


def test_nested_domains_must_increase():
    with pytest.raises(ValueError):
        nested_domain_study("paraboloid", para(), [2.0, 1.0])


# -- scaling ---------------------------------------------------------------------------------


@pytest.mark.parametrize("n", [1, 2])
@pytest.mark.parametrize("rho", [0.5, 2.0])
def test_mapped_grid_scaling_agrees_to_rounding(n, rho):
    p = para(n=n, dx=0.1, rho=rho, t_end=0.02)
    rep = scaling_study(lambda x: np.sum(x**2, axis=-1), p, factor=2.0, snapshot_times=[0.01])
    assert rep.passed
    assert rep.max_deviation < 1e-12


@settings(max_examples=10, deadline=None)
@given(st.floats(0.5, 3.0), st.floats(0.5, 2.0))
def test_scaling_with_any_factor(rho, factor):
    p = para(dx=0.1, rho=rho, t_end=0.01)
    assert scaling_study(lambda x: np.sum(x**2, axis=-1), p, factor=factor).passed


def test_same_spacing_scaling_within_bound():
    p = para(dx=0.05, t_end=0.02)
    rep = scaling_study(lambda x: np.sum(x**2, axis=-1), p, factor=2.0, same_spacing=True)
    assert rep.passed and rep.max_deviation > 0


def test_same_spacing_needs_integer_factor():
    with pytest.raises(ValueError, match="integer"):
        scaling_study(lambda x: np.sum(x**2, axis=-1), para(), factor=1.5, same_spacing=True)
