import numpy as np
import pytest

from fbms.ambient import immerse, unit_ball
from fbms.dbar import comparison_defect, defect_density, solve_dbar_reparametrization
from fbms.errors import AdmissibilityError, TopologyError
from fbms.forms import normal_section
from fbms.mesh import builtin_surface, refine_mesh


def _tangential_bump(im, seed=0):
    """Random tangential field vanishing on the boundary of the flat disk."""
    P = im.vertices
    r2 = np.sum(P[:, :2] ** 2, axis=1)
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(3, 2))
    X = np.zeros_like(P)
    X[:, 0] = (1 - r2) * (a[0, 0] + a[1, 0] * P[:, 0] + a[2, 0] * P[:, 1])
    X[:, 1] = (1 - r2) * (a[0, 1] + a[1, 1] * P[:, 0] + a[2, 1] * P[:, 1])
    X[im.surface.boundary_vertices] = 0.0
    return X


def test_zero_xi(disk8):
    sol = solve_dbar_reparametrization(disk8, np.zeros((disk8.surface.n_vertices, 3)))
    assert np.all(sol.X.values == 0) and sol.residual == 0.0
    d = comparison_defect(disk8, np.zeros((disk8.surface.n_vertices, 3)))
    assert d == {"e_val": 0.0, "a_val": 0.0, "defect_integral": 0.0, "identity_residual": 0.0}


def test_constant_normal_gives_zero_field(disk8):
    xi = normal_section(disk8, np.ones(disk8.surface.n_vertices))
    sol = solve_dbar_reparametrization(disk8, xi)
    assert np.max(np.abs(sol.X.values)) <= 1e-10


def test_quadratic_normal_residual(disk4_l3):
    P = disk4_l3.vertices
    xi = normal_section(disk4_l3, P[:, 0] ** 2 - P[:, 1] ** 2)
    sol = solve_dbar_reparametrization(disk4_l3, xi)
    assert sol.residual <= 1e-3


def test_manufactured_solution(disk8):
    Xt = _tangential_bump(disk8)
    rhs = -defect_density(disk8, np.zeros_like(Xt), Xt)
    sol = solve_dbar_reparametrization(disk8, None, rhs=rhs)
    assert sol.residual <= 1e-10 * sol.rhs_norm
    assert np.allclose(sol.X.values, Xt, atol=1e-10)
    assert np.all(sol.X.values[disk8.surface.boundary_vertices] == 0)


def test_identity_exact_on_flat_disk_with_field(disk8):
    P = disk8.vertices
    xi = normal_section(disk8, P[:, 0] + 0.3 * P[:, 1] ** 2)
    X = _tangential_bump(disk8, seed=3)
    d = comparison_defect(disk8, xi, X)
    scale = max(abs(d["e_val"]), abs(d["a_val"]), 1.0)
    assert abs(d["identity_residual"]) < 1e-10 * scale
    assert d["e_val"] >= d["a_val"] - 1e-10 * scale


def test_identity_catenoid_converges():
    res = []
    for lev in range(3):
        im = immerse(refine_mesh(builtin_surface("critical_catenoid", 4), lev), unit_ball())
        xi = normal_section(im, im.vertices[:, 2])
        d = comparison_defect(im, xi)
        res.append(abs(d["identity_residual"]) / max(abs(d["e_val"]), abs(d["a_val"]), 1.0))
    assert res[0] / res[1] > 3 and res[1] / res[2] > 3


def test_catenoid_rejected(catenoid8):
    with pytest.raises(TopologyError):
        solve_dbar_reparametrization(catenoid8, np.zeros((catenoid8.surface.n_vertices, 3)))


def test_boundary_nonzero_x_rejected(disk8):
    X = np.zeros((disk8.surface.n_vertices, 3))
    X[disk8.surface.boundary_vertices[0]] = [0, 0, 1.0]
    with pytest.raises(AdmissibilityError):
        comparison_defect(disk8, np.zeros_like(X), X)
