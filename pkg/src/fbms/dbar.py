"""The reparametrization problem relating the area and energy second variations.

On a conformal chart ``z = u + i v`` a tangential field ``X`` has
``X^{0,1} = (X + i J X) / 2`` with ``J = nu x``. For a normal variation ``xi``
the quantities compared are::

    E(X + xi) - A(xi) = 8 int |D^{1,0} X^{0,1} + (grad^{1,0} xi)^T|^2 du dv

and the solution of ``D^{1,0} X^{0,1} = -(grad^{1,0} xi)^T`` with
``X^{0,1} = 0`` on the boundary makes the defect vanish. Everything is
discretized per element in ambient coordinates: the ``d/dz`` derivative of a
P1 field is ``sum_i d_i F_i`` with constant complex coefficients ``d_i``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _fem
from .ambient import ImmersedSurface
from .errors import AdmissibilityError, SolveError, TopologyError
from .forms import SectionField, assemble_area_form, assemble_energy_form, check_admissible

__all__ = ["DbarSolution", "solve_dbar_reparametrization", "comparison_defect", "defect_density"]


def _chart_data(immersed: ImmersedSurface):
    s = immersed.surface
    if s.chart is None:
        raise TopologyError("a conformal chart is required")
    d, w, orient = _fem.chart_dz_coefficients(s.chart, s.triangles)
    _, n, _ = _fem.element_geometry(s.vertices, s.triangles)
    PT = np.eye(3)[None] - np.einsum("fa,fb->fab", n, n)
    return d, w, orient, PT


def _as_values(field, nv: int) -> np.ndarray:
    if isinstance(field, SectionField):
        field = field.values
    v = np.asarray(field, dtype=float).reshape(-1, 3)
    if v.shape[0] != nv:
        raise ValueError("section must have one vector per vertex")
    return v


def _x01(immersed: ImmersedSurface, X: np.ndarray, orient: float) -> np.ndarray:
    return 0.5 * (X + 1j * orient * np.cross(immersed.normals, X))


def defect_density(immersed: ImmersedSurface, xi, X=None) -> np.ndarray:
    """Per-element complex tangent vectors ``D^{1,0} X^{0,1} + (grad^{1,0} xi)^T``."""
    nv = immersed.surface.n_vertices
    d, _, orient, PT = _chart_data(immersed)
    F = _as_values(xi, nv).astype(complex)
    if X is not None:
        F = F + _x01(immersed, _as_values(X, nv), float(orient[0]))
    dz = np.einsum("fi,fic->fc", d, F[immersed.surface.triangles])
    return np.einsum("fab,fb->fa", PT, dz)


@dataclass(frozen=True, eq=False)
class DbarSolution:
    """Tangential field X vanishing on the boundary and the least-squares residual."""

    X: SectionField
    residual: float
    rhs_norm: float

    @property
    def relative_residual(self) -> float:
        return self.residual / self.rhs_norm if self.rhs_norm > 0 else 0.0


def _solve_weighted(immersed: ImmersedSurface, rhs: np.ndarray) -> np.ndarray:
    """Least-squares X for ``sum_e w_e |P_T sum_i d_i X01_i + rhs_e|^2`` with X = 0 on the boundary."""
    s = immersed.surface
    d, w, orient, PT = _chart_data(immersed)
    o = float(orient[0])
    if np.any(orient != o):
        raise SolveError("chart orientation is not consistent")
    frames = _fem.orthonormal_complement(immersed.normals)
    tau1 = frames[:, 0]
    tau2 = np.cross(immersed.normals, tau1) * o
    eps = 0.5 * (tau1 + 1j * tau2)

    interior = np.flatnonzero(~s.boundary_mask)
    col = -np.ones(s.n_vertices, dtype=int)
    col[interior] = np.arange(len(interior))
    T = s.triangles
    sw = np.sqrt(w)
    # entries: row (3 e + a), column col[T[e, i]], value sqrt(w_e) (P_T d_ei eps_i)_a
    vals = sw[:, None, None] * np.einsum("fab,fi,fib->fia", PT, d, eps[T])
    rows = 3 * np.arange(len(T))[:, None, None] + np.arange(3)[None, None, :]
    rows = np.broadcast_to(rows, vals.shape)
    cols = np.broadcast_to(col[T][:, :, None], vals.shape)
    keep = cols >= 0
    G = sp.csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=(3 * len(T), len(interior)))
    r = (sw[:, None] * rhs).ravel()
    N = (G.conj().T @ G).tocsc()
    b = -(G.conj().T @ r)
    f = spla.spsolve(N, b)
    if not np.all(np.isfinite(f)):
        raise SolveError("least-squares system is singular")
    back = N @ f - b
    if np.linalg.norm(back) > 1e-8 * max(1.0, np.linalg.norm(b)):
        raise SolveError("least-squares system is singular beyond tolerance")
    X = np.zeros((s.n_vertices, 3))
    X[interior] = 2.0 * np.real(f[:, None] * eps[interior])
    return X


def solve_dbar_reparametrization(immersed: ImmersedSurface, xi, rhs=None) -> DbarSolution:
    """Solve ``D^{1,0} X^{0,1} = -(grad^{1,0} xi)^T`` with ``X = 0`` on the boundary.

    Parameters
    ----------
    immersed : ImmersedSurface
        Disk-type surface carrying a conformal chart.
    xi : SectionField or array (V, 3)
        Normal variation.
    rhs : array (F, 3) complex, optional
        Replace the per-element right-hand side ``(grad^{1,0} xi)^T`` (used for
        manufactured-solution tests).

    Returns
    -------
    DbarSolution
        ``residual`` is the weighted least-squares norm
        ``(sum_e w_e |D^{1,0} X^{0,1} + rhs_e|^2)^(1/2)``.

    Raises
    ------
    TopologyError
        If the Euler characteristic is not positive.
    SolveError
        If the normal equations are singular.
    """
    topo = immersed.surface.topology()
    if topo.euler_char <= 0:
        raise TopologyError(f"the boundary-value problem is only solved on disks (chi = {topo.euler_char})")
    nv = immersed.surface.n_vertices
    d, w, orient, PT = _chart_data(immersed)
    if rhs is None:
        rhs = defect_density(immersed, xi)
    rhs = np.asarray(rhs, dtype=complex)
    rhs_norm = float(np.sqrt(np.sum(w * np.sum(np.abs(rhs) ** 2, axis=1))))
    if rhs_norm == 0.0:
        X = np.zeros((nv, 3))
    else:
        X = _solve_weighted(immersed, rhs)
    zeta = defect_density(immersed, np.zeros((nv, 3)), X) + rhs
    res = float(np.sqrt(np.sum(w * np.sum(np.abs(zeta) ** 2, axis=1))))
    return DbarSolution(SectionField.checked(immersed, X, "tangential"), res, rhs_norm)


def comparison_defect(immersed: ImmersedSurface, xi, X=None, forms=None) -> dict:
    """Evaluate both sides of the comparison identity.

    Returns
    -------
    dict
        ``e_val`` (energy form at X + xi), ``a_val`` (area form at xi),
        ``defect_integral`` (``8 int |D^{1,0} X^{0,1} + (grad^{1,0} xi)^T|^2``
        over the chart) and ``identity_residual = e_val - a_val - defect``.

    Raises
    ------
    AdmissibilityError
        If xi is not admissible or X does not vanish at boundary vertices.
    """
    nv = immersed.surface.n_vertices
    xv = _as_values(xi, nv)
    Xv = np.zeros((nv, 3)) if X is None else _as_values(X, nv)
    check_admissible(immersed, xv)
    bv = immersed.surface.boundary_vertices
    if np.max(np.abs(Xv[bv]), initial=0.0) > 1e-12 * max(1.0, float(np.max(np.abs(Xv)))):
        raise AdmissibilityError("X must vanish at boundary vertices")
    if forms is None:
        forms = (assemble_energy_form(immersed), assemble_area_form(immersed))
    energy, area = forms
    e_val = energy.value(Xv + xv)
    a_val = area.value(xv)
    _, w, _, _ = _chart_data(immersed)
    zeta = defect_density(immersed, xv, Xv)
    defect = 8.0 * float(np.sum(w * np.sum(np.abs(zeta) ** 2, axis=1)))
    return {
        "e_val": e_val,
        "a_val": a_val,
        "defect_integral": defect,
        "identity_residual": e_val - a_val - defect,
    }
