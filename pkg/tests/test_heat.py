import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fbms.ambient import immerse, unit_ball
from fbms.errors import GridError, ParameterError, SizeError, ZeroFieldError
from fbms.forms import assemble_robin_form
from fbms.heat import (betti_bound_evaluator, boundary_trace_check, default_t_grid, heat_trace,
                       index_bound_closed_form, interpolation_check, kernel_domination_check,
                       random_bump_fields, ratio_statistics, sobolev_check)
from fbms.mesh import builtin_surface
from fbms.spectral import Spectrum, beta_count, solve_spectrum


def test_trace_examples():
    assert np.allclose(heat_trace([0.0], [0.1, 1.0, 10.0]).values, 1.0)
    v = heat_trace([1.0, 2.0], [1.0]).values[0]
    assert abs(v - 0.50321) < 1e-5
    assert abs(v - (math.exp(-1) + math.exp(-2))) < 1e-15


def test_grid_errors():
    with pytest.raises(GridError):
        heat_trace([1.0], [0.0, 1.0])
    with pytest.raises(GridError):
        default_t_grid(1.0, 0.5)
    assert len(default_t_grid()) == 32


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3, 50), min_size=1, max_size=12))
def test_trace_properties(lam):
    ht = heat_trace(lam, default_t_grid(1e-3, 10.0, 24))
    assert np.all(ht.values > 0)
    assert ht.is_log_convex()
    if min(lam) >= 0:
        assert ht.is_nonincreasing()


def test_remainder_bound():
    assert heat_trace([0.5, 1.0], [1.0]).remainder[0] == 0.0
    sp_ = Spectrum(np.array([0.5, 1.0]), None, 1e-9, reduced_dim=10)
    ht = heat_trace(sp_, [2.0])
    assert abs(ht.remainder[0] - 8 * math.exp(-2.0)) < 1e-15


def test_eingb_on_disk(disk8):
    r = solve_spectrum(assemble_robin_form(disk8), k=20)
    b = beta_count(r, 0.0)
    ht = heat_trace(r, default_t_grid())
    assert np.all(b * np.exp(-0.0 * ht.t_grid) <= ht.values)


@pytest.fixture(scope="module")
def coarse_kernel():
    im = immerse(builtin_surface("flat_disk", 3), unit_ball())
    return im, kernel_domination_check(im, default_t_grid(1e-3, 10.0, 8))


def test_kernel_mass_bound(coarse_kernel):
    _, rep = coarse_kernel
    assert rep["mass_pass"]
    # t -> 0 row sums of the scalar kernel approach 1
    assert abs(rep["rows"][0]["max_mass"] - 1.0) < 1e-2


def test_kernel_traces_match_lumped_spectrum(coarse_kernel):
    im, rep = coarse_kernel
    F = assemble_robin_form(im, lumped=True)
    w = solve_spectrum(F, k=F.reduced_dim, dense=True).eigenvalues
    ht = heat_trace(w, [r["t"] for r in rep["rows"]])
    got = np.array([r["trace_bundle"] for r in rep["rows"]])
    assert np.allclose(got, ht.values, rtol=1e-9)


def test_bundle_kernel_grows_with_negative_robin_mode(coarse_kernel):
    # the admissible Robin generator has a negative eigenvalue, so k_E(t) grows
    # while the scalar kernel has mass at most one: the entrywise comparison
    # cannot hold at large t
    _, rep = coarse_kernel
    last = rep["rows"][-1]
    assert last["trace_bundle"] > 1e3
    assert last["max_mass"] <= 1 + 1e-8
    assert not rep["domination_pass"]


def test_kernel_size_error():
    im = immerse(builtin_surface("flat_disk", 12), unit_ball())
    with pytest.raises(SizeError):
        kernel_domination_check(im, [1.0], max_dofs=600)


def test_sobolev_anchor(disk4_l3):
    one = np.ones(disk4_l3.surface.n_vertices)
    s = sobolev_check(disk4_l3, one)
    assert abs(s["ratio"] - 1 / math.sqrt(math.pi)) < 1e-3
    assert s["rhs_gradient_part"] < 1e-12
    t = boundary_trace_check(disk4_l3, one)
    assert abs(t["ratio"] - 2.0) < 1e-3


def test_ratio_scale_invariance(disk8):
    phi = random_bump_fields(disk8, 3, seed=4)[1]
    for fn in (sobolev_check, boundary_trace_check):
        assert abs(fn(disk8, 2 * phi)["ratio"] - fn(disk8, phi)["ratio"]) < 1e-12


def test_zero_field(disk8):
    with pytest.raises(ZeroFieldError):
        sobolev_check(disk8, np.zeros(disk8.surface.n_vertices))


def test_trace_vanishing_near_boundary(disk8):
    r2 = np.sum(disk8.vertices[:, :2] ** 2, axis=1)
    phi = np.maximum(0.0, 0.5 - r2)
    assert boundary_trace_check(disk8, phi)["ratio"] == 0.0


def test_p1_abs_integral_sign_change(disk8):
    # |x| over the unit disk is 4/3; the exact P1 integral converges to it
    s = sobolev_check(disk8, disk8.vertices[:, 0])
    assert abs(s["rhs_l1_part"] - 4 / 3) < 2e-2


def test_ratio_statistics_seeded(disk8):
    a = ratio_statistics(disk8, 10, seed=1)
    b = ratio_statistics(disk8, 10, seed=1)
    assert a == b
    assert 0 < a["interpolation"]["max"] < np.inf


def test_interpolation_check_constant(disk8):
    one = np.ones(disk8.surface.n_vertices)
    r = interpolation_check(disk8, one)
    area = r["rhs"]
    assert abs(r["ratio"] - math.sqrt(area) / area) < 1e-12


def test_bound_rho_zero():
    r = index_bound_closed_form(math.pi, 0.0, 1.0, 1.0, 3)
    assert r["bound"] == math.pi
    assert r["t_star"] == 1e4 and r["at_boundary"]


def test_bound_area_zero():
    assert index_bound_closed_form(0.0, 1.0, 1.0, 1.0)["bound"] == 0.0


def _dim2(t, rho=1.0, c1=1.0, c2=1.0, area=1.0):
    return c2 * c2 * np.exp(rho * t) / (1 - np.exp(-c2 * t / (2 * c1))) ** 2 * area


def test_bound_rho_one_grid_scan():
    t = np.exp(np.linspace(math.log(1e-4), math.log(1e4), 10**6))
    with np.errstate(over="ignore"):
        ref = np.min(_dim2(t))
    r = index_bound_closed_form(1.0, 1.0, 1.0, 1.0)
    assert abs(r["bound"] - ref) <= 1e-6 * ref
    # closed form: the minimum of e^t / (1 - e^{-t/2})^2 is 16 at t = ln 4
    assert abs(r["bound"] - 16.0) < 1e-9
    assert abs(r["t_star"] - math.log(4)) < 1e-4


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 5), st.floats(0.1, 3), st.floats(0.1, 3), st.floats(0.1, 10))
def test_bound_tolerance_invariance(rho, c1, c2, area):
    a = index_bound_closed_form(area, rho, c1, c2, tol=1e-10)["bound"]
    b = index_bound_closed_form(area, rho, c1, c2, tol=1e-11)["bound"]
    assert abs(a - b) <= 1e-10 * a


def test_dimN_grid_scan():
    t = np.exp(np.linspace(math.log(1e-4), math.log(10), 10**5))
    n, c1, c2, p = 3, 1.0, 2.0, 1.5
    ref = np.min(c2 ** (n / 2) * np.exp(2 * t) / (1 - np.exp(-4 * c2 * t / (n * c1))) ** (n / 2) * p)
    r = index_bound_closed_form(1.0, 0.0, c1, c2, mode="dimN", n=n, p_integral=p)
    assert abs(r["bound"] - ref) <= 1e-6 * ref


def test_bound_parameter_errors():
    with pytest.raises(ParameterError):
        index_bound_closed_form(1.0, -1.0, 1.0, 1.0)
    with pytest.raises(ParameterError):
        index_bound_closed_form(1.0, 0.0, 0.0, 1.0)


def test_betti():
    assert betti_bound_evaluator(3, 0.0, 1.0) == 0.0
    assert betti_bound_evaluator(3, 2.5, 2.0) == 5.0
    with pytest.raises(ParameterError):
        betti_bound_evaluator(2, 1.0, 1.0)
