import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from fbms.ambient import (ambient_bounds, ambient_from_spec, boundary_second_form, equidistant_cap,
                          euclidean, evaluate_curvature_operator, immerse, level_set_domain,
                          space_form, unit_ball, validate_free_boundary)
from fbms.errors import FrameError, OffBoundaryError, TangencyError
from fbms.mesh import builtin_surface, refine_mesh

from conftest import shifted_disk

FRAME = np.array([[1.0, 0, 0], [0, 1.0, 0]])
finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def _tangents(p, rng):
    p = p / np.linalg.norm(p)
    a = np.cross(p, rng.normal(size=3))
    a /= np.linalg.norm(a)
    return p, a, np.cross(p, a)


def test_flat_curvature_zero():
    assert np.allclose(evaluate_curvature_operator(euclidean(), [0, 0, 0], FRAME, [1, 2, 3]), 0)


def _space_form_oracle(kappa, frame, V):
    # sum_l R(V, e_l) e_l with R(X,Y)Z = kappa (<Y,Z> X - <X,Z> Y)
    out = np.zeros(3)
    for e in frame:
        out += kappa * (np.dot(e, e) * V - np.dot(V, e) * e)
    return out


@pytest.mark.parametrize("kappa", [1.0, -1.0, 0.3])
def test_space_form_curvature(kappa):
    A = space_form(kappa)
    n = np.array([0, 0, 1.0])
    assert np.allclose(evaluate_curvature_operator(A, [0, 0, 0], FRAME, n), 2 * kappa * n)
    e1 = FRAME[0]
    assert np.allclose(evaluate_curvature_operator(A, [0, 0, 0], FRAME, e1), kappa * e1)
    V = np.array([0.3, -1.2, 0.7])
    assert np.allclose(evaluate_curvature_operator(A, [0, 0, 0], FRAME, V), _space_form_oracle(kappa, FRAME, V))


def test_non_orthonormal_frame():
    with pytest.raises(FrameError):
        evaluate_curvature_operator(space_form(1.0), [0, 0, 0], [[1, 0, 0], [1, 1, 0]], [0, 0, 1])


@settings(max_examples=50, deadline=None)
@given(arrays(float, 3, elements=finite), arrays(float, 3, elements=finite), finite, finite,
       st.floats(-2, 2))
def test_curvature_linear(V1, V2, a, b, kappa):
    A = space_form(kappa)
    op = lambda V: evaluate_curvature_operator(A, [0, 0, 0], FRAME, V)
    lhs = op(a * V1 + b * V2)
    rhs = a * op(V1) + b * op(V2)
    assert np.allclose(lhs, rhs, atol=1e-12 * (1 + np.abs(lhs).max()))


def test_sphere_second_form():
    rng = np.random.default_rng(1)
    for _ in range(10):
        p, X, Y = _tangents(rng.normal(size=3), rng)
        assert abs(boundary_second_form(unit_ball(), p, X, X) - 1) < 1e-12
        assert abs(boundary_second_form(unit_ball(), p, X, Y)) < 1e-12


def test_half_space_second_form():
    A = level_set_domain("half_space")
    assert boundary_second_form(A, [0.3, 0.1, 0], [1, 0, 0], [0.6, 0.8, 0]) == 0.0


@settings(max_examples=50, deadline=None)
@given(arrays(float, 3, elements=st.floats(-1, 1)).filter(lambda v: np.linalg.norm(v) > 0.1),
       st.integers(0, 2**31))
def test_second_form_symmetric(p, seed):
    rng = np.random.default_rng(seed)
    p, a, b = _tangents(p, rng)
    X, Y = a + 0.3 * b, b - 0.5 * a
    for A in (unit_ball(), level_set_domain("ellipsoid", axes=(1.0, 1.5, 2.0))):
        q = p
        if A.level.name != "ball":
            q = A.project_to_boundary(p)
            n = A.boundary_normal(q)
            X = X - np.dot(X, n) * n
            Y = Y - np.dot(Y, n) * n
        assert abs(boundary_second_form(A, q, X, Y) - boundary_second_form(A, q, Y, X)) < 1e-12


def test_off_boundary_and_tangency():
    with pytest.raises(OffBoundaryError):
        boundary_second_form(unit_ball(), [0.5, 0, 0], [0, 1, 0], [0, 1, 0])
    with pytest.raises(TangencyError):
        boundary_second_form(unit_ball(), [1, 0, 0], [1, 0, 0], [0, 1, 0])


def test_ambient_bounds_flat_and_ball():
    P = np.eye(3)
    assert ambient_bounds(euclidean(), P) == (0.0, 0.0)
    assert ambient_bounds(unit_ball(), P) == (0.0, 0.0)


def test_space_form_bounds():
    for k in (-1.0, 0.5):
        rho, _ = ambient_bounds(space_form(k), np.zeros((1, 3)))
        assert rho == 2 * abs(k)


def test_concave_alpha():
    # equidistant surface at hyperbolic distance d from a totally geodesic plane has II = -tanh d
    d = np.arctanh(0.5)
    A = space_form(-1.0, equidistant_cap(d))
    rng = np.random.default_rng(0)
    # boundary sample from the analytic level set
    pts = A.project_to_boundary(rng.uniform(-0.6, 0.6, size=(200, 3)))
    _, alpha_probe = ambient_bounds(A, pts, use_analytic=False)
    _, alpha = ambient_bounds(A, pts)
    assert abs(alpha - (-0.5)) < 1e-9
    assert abs(alpha_probe - alpha) < 1e-6


def test_bounds_permutation_invariant():
    A = level_set_domain("ellipsoid", axes=(1.0, 1.3, 0.8))
    rng = np.random.default_rng(3)
    pts = A.project_to_boundary(rng.normal(size=(50, 3)))
    r1 = ambient_bounds(A, pts, use_analytic=False)
    r2 = ambient_bounds(A, pts[rng.permutation(50)], use_analytic=False)
    assert r1 == r2


def test_ambient_spec_parser():
    assert ambient_from_spec("unit_ball").kind == "unit_ball_3"
    assert ambient_from_spec("space_form,kappa=-1").kappa == -1.0


def test_validate_flat_disk():
    rep = validate_free_boundary(immerse(builtin_surface("flat_disk", 6), unit_ball()))
    assert rep.mean_curvature_residual <= 1e-10
    assert rep.orthogonality_residual <= 1e-10
    assert rep.passed


def test_validate_catenoid_refinement():
    res = []
    for lev in range(3):
        im = immerse(refine_mesh(builtin_surface("critical_catenoid", 8), lev), unit_ball())
        rep = validate_free_boundary(im)
        assert rep.passed
        res.append(rep.orthogonality_residual)
    assert res[0] > res[1] > res[2]


def test_validate_shifted_disk_fails():
    h = 0.6
    rep = validate_free_boundary(immerse(shifted_disk(h), unit_ball()))
    # analytic angle: <eta, W> = sqrt(1 - h^2)
    assert abs(rep.orthogonality_residual - (1 - np.sqrt(1 - h**2))) < 1e-6
    assert rep.orthogonality_residual > 0.1
    assert not rep.passed


def test_immersed_normals_unit():
    im = immerse(builtin_surface("critical_catenoid", 6), unit_ball())
    assert np.allclose(np.linalg.norm(im.normals, axis=1), 1.0)
