import numpy as np
import pytest

from yamcap.exponents import Exponents
from yamcap.geometry import Ball, CompactSetSpec, Point
from yamcap.grids import GridSpec
from yamcap.pde import (
    SolveConfig,
    fit_far_field,
    keller_osserman_ratio,
    maximal_solution,
    rescale_solution,
    solve_dirichlet,
    solve_large,
)


def half_space_setup(N=4000, zmax=2.0, expo=None):
    expo = expo or Exponents.for_dimension(3)
    grid = GridSpec.planar(zmax, N, ambient_dim=3)
    z = grid.axis_centers(0)
    domain = np.zeros(grid.shape, bool)
    domain[1:-1] = True
    blow = np.zeros(grid.shape, bool)
    blow[0] = True
    finite = np.zeros(grid.shape)
    A = expo.blowup_amplitude
    finite[-1] = A * z[-1] ** (-float(expo.blowup_rate))
    return grid, z, domain, blow, finite


def test_exact_profile_amplitude_identity():
    # A^(q-1) = alpha (alpha + 1) with alpha = 2/(q-1) pins the wall constant
    for n in (3, 4, 5):
        e = Exponents.for_dimension(n)
        q = e.qf
        alpha = 2.0 / (q - 1.0)
        A = e.blowup_amplitude
        assert A ** (q - 1.0) == pytest.approx(alpha * (alpha + 1.0), rel=1e-12)


def test_half_space_profile_1d_exhaustion():
    expo = Exponents.for_dimension(3)
    grid, z, domain, blow, finite = half_space_setup()
    cfg = SolveConfig(large_mode="exhaustion", exhaustion_levels=(1e1, 1e2, 1e3),
                      newton_tol=1e-9)
    sol = solve_large(grid, domain, blow, cfg, expo, finite_values=finite, blowup_distance=z)
    sel = (z >= 0.1) & (z <= 0.5)
    ratio = sol.u.values[sel] * np.sqrt(z[sel]) / expo.blowup_amplitude
    assert np.all(np.abs(ratio - 1.0) < 0.02)
    # monotone exhaustion convergence: at distance >= 0.2 the last two levels
    # differ by less than 1e-3
    assert sol.exhaustion_trace[-1][1] < 1e-3


def test_verify_pointwise_flags_capacity_floor():
    from yamcap.pde import verify_pointwise_estimate

    spec = CompactSetSpec(3, (Point(center=(0.0, 0.0, 0.0)),))
    sol_grid = GridSpec.radial(2.0, 200, ambient_dim=3)
    oracle = GridSpec.radial(2.05, 205, ambient_dim=3)
    out = verify_pointwise_estimate(spec, sol_grid, oracle)
    assert out["flagged"]
    assert out["lowerRatio"] is None


def test_verify_integral_empty_set_zero():
    from yamcap.pde import verify_integral_estimate

    grid = GridSpec.radial(10.25, 512, ambient_dim=3)
    out = verify_integral_estimate(CompactSetSpec(3, ()), grid)
    assert out["integral"] == 0.0


def test_half_space_collar_and_exhaustion_agree():
    expo = Exponents.for_dimension(3)
    grid, z, domain, blow, finite = half_space_setup(N=2000)
    sols = {}
    for mode in ("collar", "exhaustion"):
        cfg = SolveConfig(large_mode=mode, exhaustion_levels=(1e2, 1e3), newton_tol=1e-9)
        sols[mode] = solve_large(
            grid, domain, blow, cfg, expo, finite_values=finite, blowup_distance=z
        )
    far = z >= 0.1
    gap = np.max(
        np.abs(sols["collar"].u.values[far] - sols["exhaustion"].u.values[far])
        / sols["exhaustion"].u.values[far]
    )
    assert gap < 0.05


def test_dirichlet_zero_data_gives_trivial_solution():
    grid = GridSpec.radial(1.0, 50, ambient_dim=3)
    domain = np.zeros(grid.shape, bool)
    domain[:-1] = True
    sol = solve_dirichlet(grid, domain, np.zeros(grid.shape))
    assert sol.flags.get("trivial_zero")
    assert not sol.u.values.any()


def test_dirichlet_maximum_principle():
    # u^q >= 0 makes u subharmonic: max at the boundary
    grid = GridSpec.radial(1.0, 80, ambient_dim=3)
    domain = np.zeros(grid.shape, bool)
    domain[:-1] = True
    c = 2.0
    boundary = np.where(~domain, c, 0.0)
    sol = solve_dirichlet(grid, domain, boundary)
    assert sol.residual_norm <= 1e-9
    assert float(sol.u.values.max()) <= c + 1e-9
    assert np.all(sol.u.values[domain] > 0.0)


def test_discrete_comparison_principle(rng):
    grid = GridSpec.radial(1.0, 60, ambient_dim=3)
    domain = np.zeros(grid.shape, bool)
    domain[:-1] = True
    for _ in range(5):
        a = float(rng.uniform(0.5, 2.0))
        b = a + float(rng.uniform(0.1, 1.0))
        ua = solve_dirichlet(grid, domain, np.where(~domain, a, 0.0)).u.values
        ub = solve_dirichlet(grid, domain, np.where(~domain, b, 0.0)).u.values
        eps_mesh = 2.0 * np.sqrt(grid.h) * np.maximum(ua, ub)
        assert np.all(ub >= ua - eps_mesh)


def test_dirichlet_profile_matches_exact_ode():
    # u'' = u^5 on (a, b) with boundary values from the exact profile
    expo = Exponents.for_dimension(3)
    A = expo.blowup_amplitude
    grid = GridSpec.planar(1.0, 5000, ambient_dim=3, zmin=0.0)
    z = grid.axis_centers(0)
    domain = (z > 0.05) & (z < 0.95)
    exact = A * z ** -0.5
    boundary = np.where(~domain, exact, 0.0)
    sol = solve_dirichlet(grid, domain, boundary, SolveConfig(newton_tol=1e-9))
    rel = np.abs(sol.u.values[domain] - exact[domain]) / exact[domain]
    assert np.max(rel) < 0.005


def test_maximal_solution_monotone_in_outer_radius():
    grid = GridSpec.radial(6.0, 1200, ambient_dim=3)
    spec = CompactSetSpec(3, (Ball(center=(0, 0, 0), radius=0.3),))
    cfg = SolveConfig(outer_radii=(3.0, 4.5, 5.9), newton_tol=1e-9)
    sol = maximal_solution(spec, grid, cfg)
    assert not sol.flags.get("nonmonotone_in_radius")
    assert all(inc >= -1e-6 for _, inc in sol.exhaustion_trace)
    assert sol.far_field_coefficient > 0


def test_domain_monotonicity_of_maximal_solutions():
    # bigger K (smaller domain) gives a bigger solution
    grid = GridSpec.radial(4.0, 800, ambient_dim=3)
    cfg = SolveConfig(outer_radii=(3.9,), newton_tol=1e-9)
    u_small = maximal_solution(
        CompactSetSpec(3, (Ball(center=(0, 0, 0), radius=0.2),)), grid, cfg
    ).u.values
    u_big = maximal_solution(
        CompactSetSpec(3, (Ball(center=(0, 0, 0), radius=0.4),)), grid, cfg
    ).u.values
    r = grid.axis_centers(0)
    sel = r > 0.5
    eps_mesh = 2.0 * np.sqrt(grid.h) * np.maximum(u_small, u_big)[sel]
    assert np.all(u_big[sel] >= u_small[sel] - eps_mesh)


def test_point_far_field_below_floor():
    spec = CompactSetSpec(3, (Point(center=(0.0, 0.0, 0.0)),))
    cfg = SolveConfig(outer_radii=(3.9,), newton_tol=1e-9)
    coeffs = []
    for cells in (400, 800):
        grid = GridSpec.radial(4.0, cells, ambient_dim=3)
        coeffs.append(maximal_solution(spec, grid, cfg).far_field_coefficient)
    ball = maximal_solution(
        CompactSetSpec(3, (Ball(center=(0, 0, 0), radius=0.25),)),
        GridSpec.radial(4.0, 400, ambient_dim=3), cfg,
    )
    # cell-scale coefficient, and it keeps shrinking under refinement
    assert coeffs[0] < 0.25 * ball.far_field_coefficient
    assert coeffs[1] < 0.85 * coeffs[0]


def test_rescale_identity_and_dyadic():
    grid = GridSpec.radial(4.0, 400, ambient_dim=3)
    spec = CompactSetSpec(3, (Ball(center=(0, 0, 0), radius=0.4),))
    cfg = SolveConfig(outer_radii=(3.9,), newton_tol=1e-9)
    sol = maximal_solution(spec, grid, cfg)
    same = rescale_solution(sol, 1.0)
    assert np.allclose(same.u.values, sol.u.values)
    assert same.grid.hi == sol.grid.hi

    # a = 2: rescaled solution matches an independent solve of the half-size scene
    half = rescale_solution(sol, 2.0)
    grid2 = half.grid
    spec2 = CompactSetSpec(3, (Ball(center=(0, 0, 0), radius=0.2),))
    cfg2 = SolveConfig(outer_radii=(grid2.hi[0] * 0.975,), newton_tol=1e-9)
    sol2 = maximal_solution(spec2, grid2, cfg2)
    r = grid2.axis_centers(0)
    sel = (r > 0.3) & (r < 1.2)
    rel = np.abs(half.u.values[sel] - sol2.u.values[sel]) / sol2.u.values[sel]
    assert np.max(rel) < 0.03


def test_rescale_preserves_halfspace_profile():
    expo = Exponents.for_dimension(3)
    grid, z, domain, blow, finite = half_space_setup(N=1000)
    cfg = SolveConfig(large_mode="collar", newton_tol=1e-9)
    sol = solve_large(grid, domain, blow, cfg, expo, finite_values=finite, blowup_distance=z)
    scaled = rescale_solution(sol, 4.0)
    z2 = scaled.grid.axis_centers(0)
    sel = (z2 > 0.05) & (z2 < 0.4)
    ratio = scaled.u.values[sel] * np.sqrt(z2[sel]) / expo.blowup_amplitude
    assert np.all(np.abs(ratio - 1.0) < 0.02)


def test_keller_osserman_uniform_across_domains():
    expo = Exponents.for_dimension(3)
    A = expo.blowup_amplitude
    grid = GridSpec.radial(4.0, 800, ambient_dim=3)
    spec = CompactSetSpec(3, (Ball(center=(0, 0, 0), radius=0.5),))
    cfg = SolveConfig(outer_radii=(3.9,), newton_tol=1e-9)
    sol = maximal_solution(spec, grid, cfg)
    d = grid.axis_centers(0) - 0.5
    ko = keller_osserman_ratio(sol, d)
    assert A / 1.8 <= ko <= A * 1.8


def test_exhaustion_levels_monotone_increasing():
    expo = Exponents.for_dimension(3)
    grid, z, domain, blow, finite = half_space_setup(N=800, zmax=1.0)
    cfg = SolveConfig(large_mode="exhaustion", exhaustion_levels=(10.0, 100.0, 1000.0),
                      newton_tol=1e-9)
    us = []
    for level in cfg.exhaustion_levels:
        sub = SolveConfig(large_mode="exhaustion", exhaustion_levels=(level,), newton_tol=1e-9)
        us.append(solve_large(grid, domain, blow, sub, expo,
                              finite_values=finite, blowup_distance=z).u.values)
    sel = domain
    assert np.all(us[1][sel] >= us[0][sel] - 1e-9)
    assert np.all(us[2][sel] >= us[1][sel] - 1e-9)


def test_far_field_fit_recovers_known_coefficient():
    # harmonic-type decay with the finite-radius image correction built in
    grid = GridSpec.radial(5.0, 500, ambient_dim=3)
    r = grid.axis_centers(0)
    A = 0.37
    R = 4.9
    vals = A * (1.0 / r - 1.0 / R)
    from yamcap.grids import ScalarField
    from yamcap.pde import SolutionField

    sol = SolutionField(
        u=ScalarField(grid, vals), kind="maximal", residual_norm=0.0,
        expo=Exponents.for_dimension(3),
    )
    assert fit_far_field(sol, R) == pytest.approx(A, rel=1e-10)
