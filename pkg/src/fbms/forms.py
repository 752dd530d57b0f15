"""Discrete second-variation forms of area and energy.

Sections are stored in ambient coordinates with vertex-major degrees of
freedom (``3 * vertex + component``). Admissibility is imposed by a sparse
constraint basis with orthonormal columns; the reduced pencil is
``(B^T A B, B^T M B)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from . import _fem
from .ambient import ImmersedSurface, validate_free_boundary
from .errors import AdmissibilityError, ValidationError

__all__ = [
    "SectionField",
    "FormAssembly",
    "assemble_energy_form",
    "assemble_area_form",
    "assemble_tangential_form",
    "assemble_robin_form",
    "assemble_scalar_robin",
    "normal_section",
]

FORM_KINDS = ("area", "energy", "energy_tangential", "robin")


@dataclass(frozen=True, eq=False)
class SectionField:
    """Per-vertex ambient vectors with a declared kind.

    Parameters
    ----------
    values : ndarray of shape (V, 3)
    kind : {"full", "normal", "tangential"}
    admissible : bool
        Whether the vectors at boundary vertices are tangent to the ambient boundary.
    """

    values: np.ndarray
    kind: str = "full"
    admissible: bool = False

    @classmethod
    def checked(cls, immersed: ImmersedSurface, values, kind: str = "full", tol: float = 1e-10) -> "SectionField":
        v = np.asarray(values, dtype=float).reshape(-1, 3)
        if v.shape[0] != immersed.surface.n_vertices:
            raise ValueError("section must have one vector per vertex")
        nu = immersed.normals
        scale = max(1.0, float(np.max(np.abs(v)))) if v.size else 1.0
        if kind == "normal":
            tang = v - np.sum(v * nu, axis=1)[:, None] * nu
            if np.max(np.abs(tang)) > tol * scale:
                raise ValueError("normal section has tangential components")
        elif kind == "tangential":
            if np.max(np.abs(np.sum(v * nu, axis=1))) > tol * scale:
                raise ValueError("tangential section has normal components")
        elif kind != "full":
            raise ValueError(f"unknown section kind {kind!r}")
        bv = immersed.surface.boundary_vertices
        adm = bool(np.max(np.abs(np.sum(v[bv] * immersed.boundary_normals, axis=1))) <= tol * scale)
        v = v.copy()
        v.setflags(write=False)
        return cls(v, kind, adm)

    def flat(self) -> np.ndarray:
        return self.values.ravel()


def normal_section(immersed: ImmersedSurface, phi) -> SectionField:
    """The normal section ``phi * nu`` for a per-vertex scalar ``phi``."""
    phi = np.asarray(phi, dtype=float)
    return SectionField.checked(immersed, phi[:, None] * immersed.normals, "normal")


@dataclass(frozen=True, eq=False)
class FormAssembly:
    """Sparse quadratic form on vertex-major ambient DOFs.

    Attributes
    ----------
    A : csr_matrix (3V, 3V)
        Symmetric form matrix; ``v @ A @ v`` is the discrete second variation.
    M : csr_matrix (3V, 3V)
        Vector-valued mass matrix.
    constraint_basis : csr_matrix (3V, r)
        Orthonormal columns spanning the admissible subspace.
    form_kind : str
    """

    A: sp.csr_matrix
    M: sp.csr_matrix
    constraint_basis: sp.csr_matrix
    form_kind: str
    immersed: Optional[ImmersedSurface] = None
    _local: dict = field(default_factory=dict, repr=False)

    @property
    def n_dofs(self) -> int:
        return self.A.shape[0]

    @property
    def reduced_dim(self) -> int:
        return self.constraint_basis.shape[1]

    def reduced(self) -> tuple:
        """Reduced pencil ``(B^T A B, B^T M B)``, exactly symmetrized."""
        B = self.constraint_basis
        return _fem.symmetrize(B.T @ self.A @ B), _fem.symmetrize(B.T @ self.M @ B)

    def _vec(self, V) -> np.ndarray:
        if isinstance(V, SectionField):
            V = V.values
        v = np.asarray(V, dtype=float).ravel()
        if v.shape[0] != self.n_dofs:
            raise ValueError(f"expected {self.n_dofs} degrees of freedom, got {v.shape[0]}")
        return v

    def value(self, V) -> float:
        """Quadratic form ``V^T A V`` on a full ambient section."""
        v = self._vec(V)
        return float(v @ (self.A @ v))

    def bilinear(self, V, W) -> float:
        return float(self._vec(V) @ (self.A @ self._vec(W)))

    def project(self, V) -> np.ndarray:
        """Orthogonal projection of a full section onto the admissible subspace (reduced coordinates)."""
        return self.constraint_basis.T @ self._vec(V)

    def lift(self, coeffs) -> np.ndarray:
        """Full (V, 3) section from reduced coordinates."""
        return (self.constraint_basis @ np.asarray(coeffs, dtype=float)).reshape(-1, 3)

    def direct_quadrature(self, V) -> float:
        """Evaluate the form element by element without the assembled matrix."""
        v = self._vec(V).reshape(-1, 3)
        loc = self._local
        tri = loc["triangles"]
        vt = v[tri]
        total = float(np.einsum("fic,fijcd,fjd->", vt, loc["interior"], vt))
        be = loc["bedges"]
        if len(be):
            vb = v[be]
            total += float(np.einsum("fic,fijcd,fjd->", vb, loc["boundary"], vb))
        return total


# ----------------------------------------------------------------------------
# element kernels


def _check(immersed: ImmersedSurface, validate: bool, tol_min: float, tol_orth: float) -> None:
    if immersed.ambient.kappa != 0.0:
        raise ValidationError("second-variation forms are assembled for flat ambients only")
    if validate:
        rep = validate_free_boundary(immersed, tol_min=tol_min, tol_orth=tol_orth)
        if not rep.passed:
            raise ValidationError(
                "surface is not free-boundary minimal within tolerance: "
                f"H residual {rep.mean_curvature_residual:.3e}, orthogonality {rep.orthogonality_residual:.3e}"
            )


def _interior_blocks(immersed: ImmersedSurface, kind: str, include_curvature: bool) -> np.ndarray:
    s = immersed.surface
    area, n, grad = _fem.element_geometry(s.vertices, s.triangles)
    G = area[:, None, None] * np.einsum("fik,fjk->fij", grad, grad)
    F = len(area)
    PN = np.einsum("fa,fb->fab", n, n)
    PT = np.eye(3)[None] - PN
    if kind == "area":
        C = PN - PT
    else:
        C = np.broadcast_to(np.eye(3), (F, 3, 3))
    local = np.einsum("fij,fcd->fijcd", G, C)
    if include_curvature and immersed.ambient.kappa != 0.0:
        frame = _fem.orthonormal_complement(n)
        R = immersed.ambient.curvature_matrix(frame)
        Mloc = area[:, None, None] * ((np.ones((3, 3)) + np.eye(3)) / 12.0)[None]
        local = local - np.einsum("fij,fcd->fijcd", Mloc, R)
    return local


def _boundary_blocks(immersed: ImmersedSurface) -> tuple:
    """-int II(V, V) dL on boundary edges with two-point Gauss quadrature."""
    s = immersed.surface
    amb = immersed.ambient
    be = s.boundary_edges
    P = s.vertices
    a, b = P[be[:, 0]], P[be[:, 1]]
    L = np.linalg.norm(b - a, axis=1)
    local = np.zeros((len(be), 2, 2, 3, 3))
    for q in _fem.GAUSS2:
        x = amb.project_to_boundary((1 - q) * a + q * b)
        S = amb.shape_matrix(x)
        phi = np.array([1 - q, q])
        local -= 0.5 * L[:, None, None, None, None] * np.einsum("i,j,fcd->fijcd", phi, phi, S)
    return be, local


def _scatter_boundary(be: np.ndarray, local: np.ndarray, n: int) -> sp.csr_matrix:
    E = be.shape[0]
    vi = be[:, :, None, None, None]
    vj = be[:, None, None, :, None]
    c = np.arange(3)[None, None, :, None, None]
    d = np.arange(3)[None, None, None, None, :]
    rows = np.broadcast_to(3 * vi + c, (E, 2, 3, 2, 3)).ravel()
    cols = np.broadcast_to(3 * vj + d, (E, 2, 3, 2, 3)).ravel()
    data = np.transpose(local, (0, 1, 3, 2, 4)).ravel()
    return sp.csr_matrix((data, (rows, cols)), shape=(3 * n, 3 * n))


def _basis_from_vectors(vectors_per_vertex: list, n: int) -> sp.csr_matrix:
    """Sparse basis whose columns are per-vertex unit vectors, in vertex order."""
    rows, cols, vals = [], [], []
    col = 0
    for v, vecs in enumerate(vectors_per_vertex):
        for w in vecs:
            for c in range(3):
                if w[c] != 0.0:
                    rows.append(3 * v + c)
                    cols.append(col)
                    vals.append(w[c])
            col += 1
    return sp.csr_matrix((vals, (rows, cols)), shape=(3 * n, col))


def _energy_basis(immersed: ImmersedSurface) -> sp.csr_matrix:
    s = immersed.surface
    vecs = [np.eye(3)] * s.n_vertices
    vecs = list(vecs)
    comp = _fem.orthonormal_complement(immersed.boundary_normals)
    for k, v in enumerate(s.boundary_vertices):
        vecs[int(v)] = comp[k]
    return _basis_from_vectors(vecs, s.n_vertices)


def _normal_basis(immersed: ImmersedSurface) -> sp.csr_matrix:
    return _basis_from_vectors([nu[None] for nu in immersed.normals], immersed.surface.n_vertices)


def _tangential_basis(immersed: ImmersedSurface) -> sp.csr_matrix:
    s = immersed.surface
    comp = _fem.orthonormal_complement(immersed.normals)
    vecs = [comp[i] for i in range(s.n_vertices)]
    bv = s.boundary_vertices
    t = np.cross(immersed.normals[bv], immersed.boundary_normals)
    t /= np.linalg.norm(t, axis=1)[:, None]
    for k, v in enumerate(bv):
        vecs[int(v)] = t[k][None]
    return _basis_from_vectors(vecs, s.n_vertices)


def _mass(immersed: ImmersedSurface, lumped: bool) -> sp.csr_matrix:
    s = immersed.surface
    return _fem.kron3(_fem.mass(s.vertices, s.triangles, lumped=lumped))


def _assemble(immersed, kind, basis, include_curvature, lumped, validate, tol_min, tol_orth) -> FormAssembly:
    _check(immersed, validate, tol_min, tol_orth)
    s = immersed.surface
    interior = _interior_blocks(immersed, "area" if kind == "area" else "energy", include_curvature)
    be, bloc = _boundary_blocks(immersed)
    A = _fem.scatter_blocks(s.triangles, interior, s.n_vertices) + _scatter_boundary(be, bloc, s.n_vertices)
    local = {"triangles": s.triangles, "interior": interior, "bedges": be, "boundary": bloc}
    return FormAssembly(_fem.symmetrize(A), _fem.symmetrize(_mass(immersed, lumped)), basis, kind, immersed, local)


def assemble_energy_form(
    immersed: ImmersedSurface,
    include_curvature: bool = True,
    lumped: bool = False,
    validate: bool = True,
    tol_min: float = 5e-2,
    tol_orth: float = 2e-2,
) -> FormAssembly:
    """Second variation of energy on admissible sections.

    ``V^T A V`` approximates ``int |grad V|^2 - <R V, V> dA - int_bdry II(V, V) dL``.

    Raises
    ------
    ValidationError
        If the surface fails the free-boundary minimality check.
    """
    kind = "energy" if include_curvature else "robin"
    return _assemble(immersed, kind, _energy_basis(immersed), include_curvature, lumped, validate, tol_min, tol_orth)


def assemble_robin_form(immersed: ImmersedSurface, lumped: bool = False, **kw) -> FormAssembly:
    """Robin rough-Laplacian form (energy form without the curvature term)."""
    return assemble_energy_form(immersed, include_curvature=False, lumped=lumped, **kw)


def assemble_area_form(
    immersed: ImmersedSurface,
    lumped: bool = False,
    validate: bool = True,
    tol_min: float = 5e-2,
    tol_orth: float = 2e-2,
) -> FormAssembly:
    """Second variation of area on normal sections.

    The per-element split of the ambient derivative into normal and tangential
    parts uses the element normal, so the integrand is
    ``|P_N D xi|^2 - |P_T D xi|^2``. The constraint basis has one column
    (the vertex normal) per vertex.
    """
    return _assemble(immersed, "area", _normal_basis(immersed), True, lumped, validate, tol_min, tol_orth)


def assemble_tangential_form(
    immersed: ImmersedSurface,
    lumped: bool = False,
    validate: bool = True,
    tol_min: float = 5e-2,
    tol_orth: float = 2e-2,
) -> FormAssembly:
    """Energy form restricted to admissible tangential sections."""
    return _assemble(immersed, "energy_tangential", _tangential_basis(immersed), True, lumped, validate, tol_min, tol_orth)


def assemble_scalar_robin(immersed: ImmersedSurface, alpha: float, lumped: bool = False) -> tuple:
    """Scalar form ``int |grad phi|^2 dA - alpha int_bdry phi^2 dL`` and its mass matrix."""
    s = immersed.surface
    K = _fem.stiffness(s.vertices, s.triangles)
    Bm = _fem.boundary_mass(s.vertices, s.boundary_edges, s.n_vertices)
    A = _fem.symmetrize(K - alpha * Bm)
    M = _fem.symmetrize(_fem.mass(s.vertices, s.triangles, lumped=lumped))
    return A, M


def check_admissible(immersed: ImmersedSurface, V, tol: float = 1e-10) -> None:
    v = np.asarray(V.values if isinstance(V, SectionField) else V, dtype=float).reshape(-1, 3)
    bv = immersed.surface.boundary_vertices
    dev = np.abs(np.sum(v[bv] * immersed.boundary_normals, axis=1))
    scale = max(1.0, float(np.max(np.abs(v)))) if v.size else 1.0
    if dev.size and float(np.max(dev)) > tol * scale:
        raise AdmissibilityError(f"section is not tangent to the ambient boundary (max {np.max(dev):.3e})")
