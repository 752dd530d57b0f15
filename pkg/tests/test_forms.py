import numpy as np
import pytest
import scipy.sparse.linalg as spla
from hypothesis import given, settings, strategies as st

from fbms.ambient import ambient_from_spec, immerse, unit_ball
from fbms.errors import AdmissibilityError, ValidationError
from fbms.forms import (SectionField, assemble_area_form, assemble_energy_form, assemble_robin_form,
                        assemble_scalar_robin, assemble_tangential_form, check_admissible,
                        normal_section)
from fbms.mesh import builtin_surface, refine_mesh

from conftest import shifted_disk


@pytest.fixture(scope="module")
def disk_forms(disk8):
    return {
        "energy": assemble_energy_form(disk8),
        "area": assemble_area_form(disk8),
        "tangential": assemble_tangential_form(disk8),
        "robin": assemble_robin_form(disk8),
    }


def _e3(im):
    return np.tile([0.0, 0.0, 1.0], (im.surface.n_vertices, 1))


def test_energy_constant_vertical(disk_forms, disk8):
    # analytic value -2 pi; the polygonal boundary has length 2 pi (1 - O(h^2))
    v = disk_forms["energy"].value(_e3(disk8))
    L = disk8.surface.mean_edge_length()
    assert abs(v + 2 * np.pi) < 2 * np.pi * L**2


def test_area_forms_oracles(disk_forms, disk8):
    F = disk_forms["area"]
    h2 = disk8.surface.mean_edge_length() ** 2
    one = normal_section(disk8, np.ones(disk8.surface.n_vertices))
    assert abs(F.value(one) + 2 * np.pi) < 2 * np.pi * h2
    x = normal_section(disk8, disk8.vertices[:, 0])
    assert abs(F.value(x)) < 2 * np.pi * h2


def test_zero_section(disk_forms, disk8):
    z = np.zeros((disk8.surface.n_vertices, 3))
    for F in disk_forms.values():
        assert F.value(z) == 0.0


@settings(max_examples=20, deadline=None)
@given(st.floats(-50, 50, allow_nan=False), st.integers(0, 1000))
def test_quadratic_homogeneity(c, seed):
    im = immerse(builtin_surface("flat_disk", 4), unit_ball())
    F = assemble_energy_form(im)
    V = np.random.default_rng(seed).normal(size=(im.surface.n_vertices, 3))
    a, b = F.value(c * V), c * c * F.value(V)
    assert abs(a - b) <= 1e-12 * max(1.0, abs(b))


def test_symmetry_and_mass(disk_forms):
    for F in disk_forms.values():
        assert (F.A != F.A.T).nnz == 0
        assert (F.M != F.M.T).nnz == 0
        _, M = F.reduced()
        w = spla.eigsh(M, k=1, which="SA", return_eigenvectors=False)
        assert w[0] > 0


def test_constraint_basis_orthonormal(disk_forms):
    for F in disk_forms.values():
        B = F.constraint_basis
        G = (B.T @ B).toarray()
        assert np.allclose(G, np.eye(G.shape[0]), atol=1e-12)


@pytest.mark.parametrize("name", ["energy", "area", "tangential"])
def test_direct_quadrature(disk_forms, catenoid8, name):
    rng = np.random.default_rng(5)
    for F in (disk_forms[name],
              {"energy": assemble_energy_form, "area": assemble_area_form,
               "tangential": assemble_tangential_form}[name](catenoid8)):
        V = rng.normal(size=(F.immersed.surface.n_vertices, 3))
        a, b = F.value(V), F.direct_quadrature(V)
        assert abs(a - b) <= 1e-12 * max(1.0, abs(a))


def test_area_equals_scalar_robin(disk_forms, disk8):
    A, _ = disk_forms["area"].reduced()
    R, _ = assemble_scalar_robin(disk8, 1.0)
    assert abs(A - R).max() < 1e-10


def test_tangential_matches_energy_on_rotation(disk_forms, disk8):
    P = disk8.vertices
    X = np.column_stack([-P[:, 1], P[:, 0], np.zeros(len(P))])
    T, E = disk_forms["tangential"], disk_forms["energy"]
    assert abs(T.value(X) - E.value(X)) < 1e-10
    # the field lies in the tangential admissible subspace
    assert np.allclose(T.lift(T.project(X)), X, atol=1e-12)


def test_robin_form_is_energy_without_curvature_in_flat_space(disk_forms):
    assert abs(disk_forms["robin"].A - disk_forms["energy"].A).max() == 0.0


def test_validation_error_on_shifted_disk():
    with pytest.raises(ValidationError):
        assemble_area_form(immerse(shifted_disk(), unit_ball()))


def test_curved_ambient_rejected():
    im = immerse(builtin_surface("flat_disk", 4), ambient_from_spec("space_form,kappa=1,boundary=ball"))
    with pytest.raises(ValidationError):
        assemble_energy_form(im, validate=False)


def test_section_kinds(disk8):
    n = disk8.surface.n_vertices
    s = SectionField.checked(disk8, _e3(disk8), "normal")
    assert s.admissible
    with pytest.raises(ValueError):
        SectionField.checked(disk8, np.tile([1.0, 0, 0], (n, 1)), "normal")
    radial = disk8.vertices.copy()
    assert not SectionField.checked(disk8, radial, "tangential").admissible
    with pytest.raises(AdmissibilityError):
        check_admissible(disk8, radial)


def test_second_order_convergence_of_constant_mode():
    errs = []
    for lev in range(3):
        im = immerse(refine_mesh(builtin_surface("flat_disk", 4), lev), unit_ball())
        errs.append(abs(assemble_area_form(im).value(_e3(im)) + 2 * np.pi))
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5
