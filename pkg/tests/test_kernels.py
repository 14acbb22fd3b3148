import numpy as np
import pytest

from yamcap import kernels
from yamcap.capacity import _components, hess_energy, quad_apply
from yamcap.exponents import Exponents
from yamcap.grids import GridSpec
from yamcap.kernels import reference


def test_spow_matches_power(rng):
    s = np.abs(rng.standard_normal(1000)) ** 2
    s[::17] = 0.0
    for n in (3, 4, 5):
        got = reference.spow_m68(s, n)
        with np.errstate(divide="ignore"):
            expect = np.where(s > 0, np.where(s > 0, s, 1.0) ** ((n - 6) / 8.0), 0.0)
        assert np.allclose(got, expect, rtol=1e-13)


@pytest.mark.parametrize(
    "grid,n",
    [
        (GridSpec.radial(2.0, 40, ambient_dim=3), 3),
        (GridSpec.radial(2.0, 40, ambient_dim=5), 5),
        (GridSpec.axisym(2.0, -2.0, 2.0, 16, ambient_dim=4), 4),
        (GridSpec.axisym(2.0, -2.0, 2.0, 16, ambient_dim=3), 3),
        (GridSpec.cube(2.0, 10, 3), 3),
    ],
)
def test_component_adjoints(grid, n, rng):
    expo = Exponents.for_dimension(n)
    for fwd, adj, _ in _components(grid, expo):
        u = rng.standard_normal(grid.shape)
        v = rng.standard_normal(grid.shape)
        lhs = float(np.sum(fwd(u) * v))
        rhs = float(np.sum(u * adj(v)))
        assert lhs == pytest.approx(rhs, rel=1e-11, abs=1e-9)


@pytest.mark.parametrize(
    "grid,n",
    [
        (GridSpec.radial(2.0, 50, ambient_dim=4), 4),
        (GridSpec.axisym(2.0, -2.0, 2.0, 14, ambient_dim=5), 5),
        (GridSpec.cube(2.0, 8, 3), 3),
    ],
)
def test_gradient_matches_finite_differences(grid, n, rng):
    expo = Exponents.for_dimension(n)
    phi = rng.random(grid.shape) * 0.5
    _, g = hess_energy(grid, phi, expo, need_grad=True)
    d = rng.standard_normal(grid.shape)
    eps = 1e-6
    fp, _ = hess_energy(grid, phi + eps * d, expo)
    fm, _ = hess_energy(grid, phi - eps * d, expo)
    fd = (fp - fm) / (2 * eps)
    assert float(np.sum(g * d)) == pytest.approx(fd, rel=1e-5)


def test_quad_apply_matches_quadratic_form(rng):
    for grid, n in (
        (GridSpec.radial(2.0, 40, ambient_dim=3), 3),
        (GridSpec.axisym(2.0, -2.0, 2.0, 12, ambient_dim=4), 4),
        (GridSpec.cube(2.0, 9, 3), 3),
    ):
        expo = Exponents.for_dimension(n)
        rho = np.abs(rng.standard_normal(grid.shape)) + 0.1
        phi = rng.standard_normal(grid.shape)
        s = np.zeros(grid.shape)
        for fwd, _, mult in _components(grid, expo):
            c = fwd(phi)
            s += mult * c * c
        lhs = float(np.sum(phi * quad_apply(grid, expo, rho, phi)))
        assert lhs == pytest.approx(float(np.sum(rho * s)), rel=1e-11)


@pytest.mark.skipif(not kernels.HAVE_COMPILED, reason="compiled kernels unavailable")
def test_compiled_matches_reference(rng):
    p = np.ascontiguousarray(rng.standard_normal((20, 22, 24)))
    rho = np.ascontiguousarray(np.abs(rng.standard_normal((20, 22, 24))) + 0.2)
    h = 0.05
    for n in (3, 4, 5):
        o1, g1 = reference.hess_power_full(p, h, (n + 2) / 4.0, n, True)
        o2, g2 = kernels._core.hess_power_3d(p, h, n, True)
        assert o2 == pytest.approx(o1, rel=1e-13)
        assert np.allclose(g1, g2, rtol=1e-12, atol=1e-12 * np.max(np.abs(g1)))
    assert np.allclose(reference.lap_full(p, h), kernels._core.lap_3d(p, h), atol=1e-10)
    q_ref = kernels.quad_apply_full(p.copy(), rho, h)
    # force the reference path by a non-contiguous view
    q_ref2 = np.zeros_like(p)
    d = p.ndim
    for a in range(d):
        q_ref2 += reference.second_diff(rho * reference.second_diff(p, a, h), a, h)
    for a in range(d):
        for b in range(a + 1, d):
            q_ref2 += 2.0 * reference.cross_diff(rho * reference.cross_diff(p, a, b, h), a, b, h)
    assert np.allclose(q_ref, q_ref2, rtol=1e-12, atol=1e-9)


def test_backend_reports_name():
    assert kernels.BACKEND in ("compiled", "reference")
