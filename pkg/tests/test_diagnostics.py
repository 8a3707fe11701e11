import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from convexflow import GridSpec
from convexflow.diagnostics import (
    DirectionNotAttained,
    Patch,
    PatchInvalid,
    c2_closed_form,
    c2_monitor,
    dual_concavity_check,
    dual_fd_error,
    dual_matrix,
    evolution_identity_check,
    harnack_check,
    harnack_sphere,
    harnack_tolerance,
    locate_normal,
    normal_image_disjointness,
    nu_preservation_check,
    nu_profile,
    principal_minor_formula,
    velocity_floor_check,
)
from convexflow.exact import SphereSolution, scenario, sphere_cap_graph
from convexflow.solver import FlowParams, Trajectory, run

from conftest import sample
from oracles import CONE_NU_EPS, CONE_NU_RADII, PARABOLOID_NU_EPS, PARABOLOID_NU_RADII, SPEED_RATE_RHO1_N2_R1


def sphere_traj(s, times, L=0.5, dx=0.02):
    p = FlowParams(rho=s.rho, n=s.n, L=L, dx=dx, t_end=max(times), boundary="barrier", barrier=s)
    return Trajectory.from_snapshots(p, [sphere_cap_graph(s, t, p.grid) for t in times])


# -- normal oscillation -----------------------------------------------------------


@pytest.mark.parametrize("n", [1, 2])
def test_affine_graph_has_no_normal_oscillation(n):
    g = GridSpec(n, 3.0, 0.1)
    prof = nu_profile(sample(g, lambda x: 0.4 * x[..., 0] + 1.0), (0.5, 1.0, 2.0))
    assert np.all(prof.eps_of_r <= 1e-13)
    assert np.all(prof.pair_count > 0)


def test_paraboloid_profile_matches_brute_force():
    g = GridSpec(1, 4.0, 0.01)
    prof = nu_profile(scenario("paraboloid", g), PARABOLOID_NU_RADII)
    assert np.allclose(prof.eps_of_r, PARABOLOID_NU_EPS, rtol=1e-3)
    assert prof.decays(0.2)


def test_cone_profile_matches_brute_force():
    g = GridSpec(2, 2.5, 0.05)
    prof = nu_profile(scenario("smoothed_cone", g, mu=0.05), CONE_NU_RADII)
    assert np.allclose(prof.eps_of_r, CONE_NU_EPS, atol=0.05)
    assert not prof.decays(0.2)


def test_profile_rejects_radii_beyond_the_graph():
    g = GridSpec(1, 1.0, 0.1)
    with pytest.raises(ValueError, match="reaches only"):
        nu_profile(scenario("paraboloid", g), (0.5, 10.0))


def test_profile_needs_increasing_radii():
    with pytest.raises(ValueError):
        nu_profile(scenario("paraboloid", GridSpec(1, 1.0, 0.1)), (2.0, 1.0))


def test_strided_profile_is_a_lower_bound():
    u = scenario("paraboloid", GridSpec(2, 2.0, 0.05))
    full = nu_profile(u, (0.5, 1.0))
    coarse = nu_profile(u, (0.5, 1.0), stride=2)
    assert np.all(coarse.eps_of_r <= full.eps_of_r + 1e-15)


def test_paraboloid_flow_preserves_the_profile():
    p = FlowParams(rho=1.0, n=1, L=4.0, dx=0.02, t_end=0.02)
    traj = run(scenario("paraboloid", p.grid), p, snapshot_times=[0.01])
    rep = nu_preservation_check(traj, PARABOLOID_NU_RADII)
    assert rep.passed
    assert rep.slack == pytest.approx(0.2)
    assert rep.excess.shape == (3, 3)


# -- localized curvature bound -------------------------------------------------------


def test_c2_monitor_starts_at_zero_time_weight():
    s = SphereSolution.resting_on_origin(2.0, 1.0, 1)
    traj = sphere_traj(s, [0.0, 0.01, 0.02])
    mon = c2_monitor(traj, 2.0, Patch((0.1,), 0.04, 0.5))
    assert mon.time_weighted[0] == 0.0
    assert np.all(mon.localized > 0)
    assert np.all(mon.patch_sizes > 0)


def test_c2_monitor_on_exact_caps_matches_closed_form():
    s = SphereSolution.resting_on_origin(2.0, 1.0, 1)
    times = [0.0, 0.01, 0.02]
    errs = []
    for dx in (0.02, 0.01):
        traj = sphere_traj(s, times, dx=dx)
        patch = Patch((0.1,), 0.04, 0.5)
        mon = c2_monitor(traj, 2.0, patch)
        loc, tw = c2_closed_form(s, traj.times, traj.grid, 2.0, patch)
        errs.append(np.max(np.abs(mon.localized - loc)))
        assert np.max(np.abs(mon.time_weighted - tw)) <= 5 * dx**2
    assert errs[0] / errs[1] > 3.0


def test_c2_monitor_rejects_small_beta():
    s = SphereSolution.resting_on_origin(2.0, 1.0, 1)
    with pytest.raises(ValueError):
        c2_monitor(sphere_traj(s, [0.0, 0.01]), 1.0, Patch((0.1,), 0.04, 0.5))


def test_c2_monitor_flags_patch_reaching_the_edge():
    s = SphereSolution.resting_on_origin(2.0, 1.0, 1)
    with pytest.raises(PatchInvalid):
        c2_monitor(sphere_traj(s, [0.0, 0.01]), 2.0, Patch((0.1,), 1.0, 5.0))


def test_c2_monitor_flags_steep_patch():
    s = SphereSolution.resting_on_origin(2.0, 1.0, 1)
    with pytest.raises(PatchInvalid):
        c2_monitor(sphere_traj(s, [0.0, 0.01]), 2.0, Patch((0.1,), 0.04, 1e-4))


# -- evolution identities --------------------------------------------------------------


@settings(max_examples=60, deadline=None)
@given(
    st.floats(0.25, 5.0), st.sampled_from([1, 2]), st.floats(0.5, 5.0),
    st.floats(0.05, 0.95), st.floats(0.0, 1.2), st.sampled_from(["F", "v", "X"]),
)
def test_evolution_identities_hold_on_spheres(rho, n, r0, frac, polar, identity):
    s = SphereSolution.resting_on_origin(r0, rho, n)
    res = evolution_identity_check(s, frac * s.extinction_time, identity, polar)
    assert res < 1e-8


def test_speed_rate_on_unit_sphere():
    # rho = 1, n = 2 at r = 1: F = 2, dF/dt = F^ij h h F = 2 * 2 = 4
    s = SphereSolution.resting_on_origin(2.0, 1.0, 2)
    t = (4.0 - 1.0) / 4.0
    assert s.radius(t) == pytest.approx(1.0)
    h = 1e-6
    rate = (s.speed(t + h) - s.speed(t - h)) / (2 * h)
    assert rate == pytest.approx(SPEED_RATE_RHO1_N2_R1, rel=1e-6)


def test_unknown_identity_rejected():
    s = SphereSolution.resting_on_origin(1.0, 1.0, 1)
    with pytest.raises(ValueError):
        evolution_identity_check(s, 0.1, "Q")


# -- dual concavity -----------------------------------------------------------------------


def test_dual_matrix_at_ones():
    assert np.allclose(dual_matrix([1.0, 1.0], 1.0), [[1.0, -1.0], [-1.0, 1.0]], rtol=1e-14)
    assert principal_minor_formula([1.0, 1.0], 1.0, 2) == pytest.approx(0.0, abs=1e-15)


def test_dual_matrix_one_dimensional_is_zero():
    for rho in (0.5, 1.0, 3.0):
        assert np.allclose(dual_matrix([2.0], rho), 0.0, atol=1e-14)


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(-2.0, 2.0), min_size=2, max_size=3),
    st.sampled_from([0.5, 1.0, 2.0, 5.0]),
)
def test_dual_matrix_is_semidefinite_with_closed_form_minors(loglam, rho):
    lam = 10.0 ** np.array(loglam)
    M = dual_matrix(lam, rho)
    assert np.allclose(M, M.T)
    assert np.linalg.eigvalsh(M).min() >= -1e-10 * np.linalg.norm(M, 2)
    for k in range(1, len(lam) + 1):
        scale = np.prod(np.diag(M)[:k])
        assert abs(np.linalg.det(M[:k, :k]) - principal_minor_formula(lam, rho, k)) <= 1e-9 * scale


def test_printed_minor_differs_away_from_ones():
    lam = [2.0, 3.0]
    good = principal_minor_formula(lam, 1.0, 1)
    printed = principal_minor_formula(lam, 1.0, 1, as_printed=True)
    assert good == pytest.approx(dual_matrix(lam, 1.0)[0, 0])
    assert printed != pytest.approx(good)
    assert principal_minor_formula([1.0, 1.0], 2.0, 1, as_printed=True) == pytest.approx(
        principal_minor_formula([1.0, 1.0], 2.0, 1)
    )


@pytest.mark.parametrize("rho", [0.5, 1.0, 2.0, 5.0])
def test_fd_reconstruction_agrees(rho):
    rng = np.random.default_rng(1)
    lam = 10.0 ** rng.uniform(-2, 2, size=(20, 2))
    assert max(dual_fd_error(l, rho) for l in lam) < 1e-4


def test_dual_concavity_report():
    rng = np.random.default_rng(0)
    rep = dual_concavity_check(2.0, 10.0 ** rng.uniform(-2, 2, size=(50, 2)))
    assert rep.passed
    assert rep.printed_minor_error > 0.1
    with pytest.raises(ValueError):
        dual_concavity_check(1.0, [[1.0, -1.0]])


# -- Harnack ------------------------------------------------------------------------------------


@pytest.mark.parametrize("rho", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("n", [1, 2])
def test_sphere_harnack_ratio_exceeds_bound(rho, n):
    s = SphereSolution.resting_on_origin(1.0, rho, n)
    ts = np.linspace(0.05, 0.95, 6) * s.extinction_time
    for i, t1 in enumerate(ts):
        for t2 in ts[i:]:
            rec = harnack_sphere(s, t1, t2)
            assert rec.ratio >= rec.bound and rec.passed


def test_harnack_equal_times_gives_ratio_one():
    s = SphereSolution.resting_on_origin(1.0, 1.0, 1)
    rec = harnack_sphere(s, 0.1, 0.1)
    assert rec.ratio == 1.0 and rec.bound == 1.0 and rec.passed


def test_harnack_tolerance_formula():
    assert harnack_tolerance(0.01, 0.5) == pytest.approx(50 * 1e-4 / 0.5)
    assert harnack_tolerance(0.01, 2.0) == pytest.approx(50 * 1e-4)


def test_harnack_on_paraboloid_flow():
    p = FlowParams(rho=1.0, n=1, L=2.0, dx=0.01, t_end=0.04)
    traj = run(scenario("paraboloid", p.grid), p, snapshot_times=[0.01])
    rec = harnack_check(traj, (0.0, -1.0), 0.01, 0.04)
    assert rec.passed
    assert abs(rec.x1[0]) < 1e-6


def test_harnack_needs_ordered_times():
    s = SphereSolution.resting_on_origin(1.0, 1.0, 1)
    with pytest.raises(ValueError):
        harnack_sphere(s, 0.2, 0.1)


def test_locate_normal_refines_between_nodes():
    g = GridSpec(1, 2.0, 0.1)
    u = scenario("paraboloid", g)
    p = np.array([0.33, -1.0])
    x, F, H = locate_normal(u, p, 1.0)
    # normal of x^2 at x is (2x, -1)/W
    assert x[0] == pytest.approx(0.165, abs=1e-12)
    assert F == pytest.approx(H)


def test_locate_normal_rejects_unattained_direction():
    u = scenario("paraboloid", GridSpec(1, 1.0, 0.1))
    with pytest.raises(DirectionNotAttained):
        locate_normal(u, (10.0, -1.0), 1.0)
    with pytest.raises(DirectionNotAttained):
        locate_normal(u, (0.0, 1.0), 1.0)


# -- velocity floor and disjointness ------------------------------------------------------------


def test_velocity_floor_on_exact_sphere():
    s = SphereSolution.resting_on_origin(1.0, 1.0, 2)
    ts = np.linspace(0.0, 0.5, 6) * s.extinction_time
    rep = velocity_floor_check(sphere_traj(s, ts, L=0.3, dx=0.01), (0.1, 0.0), ts[-1])
    assert rep.passed
    assert np.allclose(rep.curvatures, [s.mean_curvature(t) for t in rep.times], rtol=1e-3)


def test_velocity_floor_on_paraboloid():
    p = FlowParams(rho=1.0, n=1, L=2.0, dx=0.02, t_end=0.02)
    traj = run(scenario("paraboloid", p.grid), p, snapshot_times=[0.01, 0.015])
    rep = velocity_floor_check(traj, (0.5,), 0.02)
    assert rep.passed and rep.times.tolist() == [0.01, 0.015, 0.02]


def test_velocity_floor_needs_positive_time():
    s = SphereSolution.resting_on_origin(1.0, 1.0, 1)
    with pytest.raises(ValueError):
        velocity_floor_check(sphere_traj(s, [0.0, 0.1]), (0.1,), 0.0)


def test_normal_images_stay_apart_on_paraboloid():
    p = FlowParams(rho=1.0, n=2, L=2.0, dx=0.05, t_end=0.02)
    traj = run(scenario("paraboloid", p.grid), p, snapshot_times=[0.01])
    rep = normal_image_disjointness(traj, 0.5, 1.5, 0.02)
    assert rep.passed
    assert len(rep.times) == 3 and np.all(rep.separations > rep.margin)


def test_normal_images_overlap_when_radii_touch():
    p = FlowParams(rho=1.0, n=1, L=2.0, dx=0.05, t_end=0.0)
    traj = run(scenario("paraboloid", p.grid), p)
    assert not normal_image_disjointness(traj, 1.0, 1.01, 0.0).passed


def test_disjointness_validates_radii():
    p = FlowParams(rho=1.0, n=1, L=2.0, dx=0.05, t_end=0.0)
    traj = run(scenario("paraboloid", p.grid), p)
    with pytest.raises(ValueError):
        normal_image_disjointness(traj, 1.0, 0.5, 0.0)
    with pytest.raises(ValueError):
        normal_image_disjointness(traj, 1.0, 3.0, 0.0)
