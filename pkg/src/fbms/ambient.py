"""Ambient spaces, boundary shape operators, and immersed surfaces in them.

Ambients are three-dimensional and written in a single Euclidean chart.
Space forms use the conformally flat model with metric ``phi(x)**2 * dx**2``,
``phi = 2 / (1 + kappa |x|^2)``, so their boundary second fundamental form is
computed from the Euclidean level-set data plus the gradient of
``log(phi)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _fem
from .errors import FrameError, OffBoundaryError, TangencyError
from .mesh import TriangulatedSurface

__all__ = [
    "LevelSet",
    "AmbientSpace",
    "ImmersedSurface",
    "ValidationReport",
    "unit_ball",
    "euclidean",
    "space_form",
    "level_set_domain",
    "ambient_from_spec",
    "immerse",
    "evaluate_curvature_operator",
    "boundary_second_form",
    "ambient_bounds",
    "validate_free_boundary",
    "equidistant_cap",
]

TOL_FRAME = 1e-10
TOL_TANGENT = 1e-8


@dataclass(frozen=True)
class LevelSet:
    """Domain ``{f <= 0}`` with boundary ``{f = 0}``; vectorized over rows."""

    name: str
    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray]
    project: Optional[Callable[[np.ndarray], np.ndarray]] = None
    params: dict = field(default_factory=dict)


def _sphere_level(radius: float = 1.0, center=(0.0, 0.0, 0.0), exterior: bool = False, name=None):
    c = np.asarray(center, dtype=float)
    sgn = -1.0 if exterior else 1.0

    def value(x):
        return sgn * (np.sum((x - c) ** 2, axis=-1) - radius**2) / (2 * radius)

    def gradient(x):
        return sgn * (x - c) / radius

    def hessian(x):
        return np.broadcast_to(sgn * np.eye(3) / radius, x.shape[:-1] + (3, 3)).copy()

    def project(x):
        d = x - c
        return c + radius * d / np.linalg.norm(d, axis=-1, keepdims=True)

    nm = name or ("ball_exterior" if exterior else "ball")
    return LevelSet(nm, value, gradient, hessian, project,
                    {"radius": radius, "center": c.tolist(), "exterior": exterior})


def _half_space_level(normal=(0.0, 0.0, 1.0), offset: float = 0.0):
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)

    def value(x):
        return x @ n - offset

    def gradient(x):
        return np.broadcast_to(n, x.shape).copy()

    def hessian(x):
        return np.zeros(x.shape[:-1] + (3, 3))

    def project(x):
        return x - (x @ n - offset)[..., None] * n

    return LevelSet("half_space", value, gradient, hessian, project,
                    {"normal": n.tolist(), "offset": offset})


def _ellipsoid_level(axes=(1.0, 1.0, 1.0)):
    a2 = np.asarray(axes, dtype=float) ** 2

    def value(x):
        return 0.5 * (np.sum(x**2 / a2, axis=-1) - 1.0)

    def gradient(x):
        return x / a2

    def hessian(x):
        return np.broadcast_to(np.diag(1.0 / a2), x.shape[:-1] + (3, 3)).copy()

    def project(x):
        s = np.sqrt(np.sum(x**2 / a2, axis=-1, keepdims=True))
        return x / s

    return LevelSet("ellipsoid", value, gradient, hessian, project, {"axes": list(axes)})


def equidistant_cap(distance: float) -> LevelSet:
    """Concave boundary of a hyperbolic domain in the Poincare ball model.

    The boundary is the equidistant surface at hyperbolic ``distance`` from the
    totally geodesic plane ``{x3 = 0}``; the domain is the side away from the
    plane, so the shape operator is ``-tanh(distance)`` times the identity
    (for curvature -1).
    """
    h = math.tanh(distance / 2.0)
    c = (1.0 - h * h) / (2.0 * h)
    level = _sphere_level(math.sqrt(1.0 + c * c), center=(0.0, 0.0, -c), exterior=True,
                          name="equidistant_cap")
    return LevelSet(level.name, level.value, level.gradient, level.hessian, level.project,
                    {**level.params, "distance": distance})


@dataclass(frozen=True)
class AmbientSpace:
    """Three-dimensional ambient manifold with (optional) boundary.

    kind is one of ``euclidean_3``, ``unit_ball_3``, ``space_form`` and
    ``level_set_domain``. ``kappa`` is the sectional curvature (space forms
    only); ``level`` describes the boundary.
    """

    kind: str
    kappa: float = 0.0
    level: Optional[LevelSet] = None
    dimension: int = 3

    @property
    def has_boundary(self) -> bool:
        return self.level is not None

    @property
    def is_flat(self) -> bool:
        return self.kappa == 0.0

    def describe(self) -> dict:
        out = {"kind": self.kind, "kappa": self.kappa, "dimension": self.dimension}
        if self.level is not None:
            out["boundary"] = {"name": self.level.name, **self.level.params}
        return out

    # -- metric --------------------------------------------------------
    def conformal_factor(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind != "space_form" or self.kappa == 0.0:
            return np.ones(x.shape[:-1])
        return 2.0 / (1.0 + self.kappa * np.sum(x**2, axis=-1))

    def log_factor_gradient(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind != "space_form" or self.kappa == 0.0:
            return np.zeros_like(x)
        return -2.0 * self.kappa * x / (1.0 + self.kappa * np.sum(x**2, axis=-1, keepdims=True))

    # -- boundary ------------------------------------------------------
    def _need_boundary(self):
        if self.level is None:
            raise OffBoundaryError(f"ambient {self.kind!r} has no boundary")

    def boundary_distance(self, x: np.ndarray) -> np.ndarray:
        """First-order Euclidean distance |f| / |grad f| to the boundary."""
        self._need_boundary()
        x = np.asarray(x, dtype=float)
        return np.abs(self.level.value(x)) / np.linalg.norm(self.level.gradient(x), axis=-1)

    def boundary_normal(self, x: np.ndarray) -> np.ndarray:
        """Outward normal direction (Euclidean unit length) of the boundary level sets."""
        self._need_boundary()
        g = self.level.gradient(np.asarray(x, dtype=float))
        return g / np.linalg.norm(g, axis=-1, keepdims=True)

    def project_to_boundary(self, x: np.ndarray) -> np.ndarray:
        self._need_boundary()
        x = np.asarray(x, dtype=float)
        if self.level.project is not None:
            return self.level.project(x)
        for _ in range(20):
            g = self.level.gradient(x)
            x = x - (self.level.value(x) / np.sum(g * g, axis=-1))[..., None] * g
        return x

    def shape_matrix(self, x: np.ndarray) -> np.ndarray:
        """Matrix S with II(X, Y) = X^T S Y for coordinate vectors tangent to the boundary.

        ``S = phi * (Hess f / |grad f| + d_nu(log phi) I)``; for flat ambients
        this is the Hessian of the level function over its gradient norm.
        """
        self._need_boundary()
        x = np.asarray(x, dtype=float)
        g = self.level.gradient(x)
        gn = np.linalg.norm(g, axis=-1)
        S = self.level.hessian(x) / gn[..., None, None]
        if self.kind == "space_form" and self.kappa != 0.0:
            nu = g / gn[..., None]
            dnu = np.sum(self.log_factor_gradient(x) * nu, axis=-1)
            S = self.conformal_factor(x)[..., None, None] * (S + dnu[..., None, None] * np.eye(3))
        return S

    def analytic_alpha(self) -> Optional[float]:
        """Closed-form infimum of the boundary shape operator, clamped at 0."""
        lv = self.level
        if lv is None:
            return None
        if lv.name == "half_space":
            return 0.0
        if lv.name in ("ball", "ellipsoid") and (self.kind != "space_form" or self.kappa >= 0):
            return 0.0
        if lv.name == "ball" and self.kind == "space_form":
            r = lv.params["radius"]
            return min(0.0, (1.0 - self.kappa * r * r) / (2.0 * r))
        if lv.name == "ball_exterior" and self.kind != "space_form":
            return -1.0 / lv.params["radius"]
        if lv.name == "equidistant_cap" and self.kind == "space_form" and self.kappa == -1.0:
            return -math.tanh(lv.params["distance"])
        return None

    def analytic_rho(self) -> float:
        """sup |R| over the ambient: 2|kappa| for constant curvature kappa."""
        return 2.0 * abs(self.kappa)

    def curvature_matrix(self, frame: np.ndarray) -> np.ndarray:
        """Matrix of V -> sum_l R(V, e_l) e_l in g-orthonormal coordinates.

        ``frame`` has shape (..., 2, 3); for constant curvature kappa the
        operator is ``kappa * (2 I - P_T)``.
        """
        frame = np.asarray(frame, dtype=float)
        PT = np.einsum("...la,...lb->...ab", frame, frame)
        return self.kappa * (2.0 * np.eye(3) - PT)


def euclidean() -> AmbientSpace:
    return AmbientSpace("euclidean_3")


def unit_ball() -> AmbientSpace:
    return AmbientSpace("unit_ball_3", level=_sphere_level(1.0))


def space_form(kappa: float, boundary: Optional[LevelSet] = None) -> AmbientSpace:
    return AmbientSpace("space_form", kappa=float(kappa), level=boundary)


LEVEL_CATALOGUE = {
    "ball": _sphere_level,
    "ball_exterior": lambda radius=1.0: _sphere_level(radius, exterior=True),
    "half_space": _half_space_level,
    "ellipsoid": _ellipsoid_level,
    "equidistant_cap": equidistant_cap,
}


def level_set_domain(name: str, **params) -> AmbientSpace:
    """Flat domain bounded by a catalogue level set."""
    if name not in LEVEL_CATALOGUE:
        raise ValueError(f"unknown level set {name!r}; choose from {sorted(LEVEL_CATALOGUE)}")
    return AmbientSpace("level_set_domain", level=LEVEL_CATALOGUE[name](**params))


def ambient_from_spec(spec: str) -> AmbientSpace:
    """Parse ``NAME[,key=value...]`` as used by the command line.

    Examples: ``unit_ball``, ``euclidean``, ``space_form,kappa=-1``,
    ``half_space``, ``ball,radius=2``,
    ``space_form,kappa=-1,boundary=equidistant_cap,distance=0.5493``.
    """
    parts = [p.strip() for p in spec.split(",") if p.strip()]
    if not parts:
        raise ValueError("empty ambient spec")
    name, kv = parts[0], {}
    for p in parts[1:]:
        k, _, v = p.partition("=")
        kv[k.strip().replace("κ", "kappa")] = v.strip()
    if name in ("unit_ball", "unit_ball_3"):
        return unit_ball()
    if name in ("euclidean", "euclidean_3"):
        return euclidean()
    if name == "space_form":
        kappa = float(kv.pop("kappa", 0.0))
        bname = kv.pop("boundary", None)
        level = LEVEL_CATALOGUE[bname](**{k: float(v) for k, v in kv.items()}) if bname else None
        return space_form(kappa, level)
    return level_set_domain(name, **{k: float(v) for k, v in kv.items()})


# ----------------------------------------------------------------------------
# pointwise evaluators


def evaluate_curvature_operator(ambient: AmbientSpace, point, tangent_frame, V) -> np.ndarray:
    """Apply the curvature operator ``V -> sum_l R(V, e_l) e_l``.

    Vectors are given in a g-orthonormal basis at ``point``.
    """
    frame = np.asarray(tangent_frame, dtype=float).reshape(2, -1)
    gram = frame @ frame.T
    if np.max(np.abs(gram - np.eye(2))) > TOL_FRAME:
        raise FrameError("tangent frame is not orthonormal")
    return ambient.curvature_matrix(frame) @ np.asarray(V, dtype=float)


def boundary_second_form(ambient: AmbientSpace, boundary_point, X, Y, tol_bdry: float = 1e-8) -> float:
    """Second fundamental form ``<nabla_X W, Y>`` of the ambient boundary."""
    p = np.asarray(boundary_point, dtype=float)
    if float(ambient.boundary_distance(p)) > tol_bdry:
        raise OffBoundaryError("point is not on the ambient boundary")
    nu = ambient.boundary_normal(p)
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    for v in (X, Y):
        if abs(v @ nu) > TOL_TANGENT * max(1.0, np.linalg.norm(v)):
            raise TangencyError("vector is not tangent to the ambient boundary")
    return float(X @ ambient.shape_matrix(p) @ Y)


def _probe_alpha(ambient: AmbientSpace, points: np.ndarray) -> float:
    pts = ambient.project_to_boundary(points)
    nu = ambient.boundary_normal(pts)
    basis = _fem.orthonormal_complement(nu)
    S = ambient.shape_matrix(pts)
    S2 = np.einsum("pia,pab,pjb->pij", basis, S, basis)
    # g-unit tangent vectors are Euclidean-unit vectors divided by phi
    S2 = S2 / ambient.conformal_factor(pts)[:, None, None] ** 2
    return float(np.min(np.linalg.eigvalsh(S2)[:, 0]))


def ambient_bounds(ambient: AmbientSpace, probe_points=None, use_analytic: bool = True) -> tuple:
    """Return ``(rho, alpha)``.

    ``rho = sup |R|`` is analytic for every supported kind. ``alpha`` is the
    clamped infimum ``min{0, inf II}``: analytic when a closed form is known
    and ``use_analytic``, otherwise the minimum over ``probe_points``
    projected onto the boundary.
    """
    rho = ambient.analytic_rho()
    if not ambient.has_boundary:
        return rho, 0.0
    alpha = ambient.analytic_alpha() if use_analytic else None
    if alpha is None:
        if probe_points is None or len(probe_points) == 0:
            raise ValueError("probe points are required when alpha has no closed form")
        alpha = min(0.0, _probe_alpha(ambient, np.asarray(probe_points, dtype=float)))
        if ambient.kind == "level_set_domain" and ambient.level.name not in LEVEL_CATALOGUE:
            warnings.warn("probed alpha is an upper estimate of the true infimum")
    return rho, alpha


# ----------------------------------------------------------------------------
# immersed surfaces


@dataclass(frozen=True, eq=False)
class ImmersedSurface:
    """A triangulated surface placed in an ambient space.

    ``normals`` are unit vertex normals (area-weighted face normals, made
    tangent to the ambient boundary at boundary vertices); ``conormals`` are
    the outward unit conormals at ``surface.boundary_vertices``.
    """

    surface: TriangulatedSurface
    ambient: AmbientSpace
    normals: np.ndarray
    conormals: np.ndarray
    boundary_normals: np.ndarray

    @property
    def vertices(self):
        return self.surface.vertices

    @property
    def triangles(self):
        return self.surface.triangles


def immerse(surface: TriangulatedSurface, ambient: AmbientSpace, tol_bdry: float = 1e-6) -> ImmersedSurface:
    """Attach normal and conormal frames; boundary vertices must lie on the ambient boundary."""
    if not ambient.has_boundary:
        raise OffBoundaryError("free-boundary surfaces need an ambient with boundary")
    V = surface.vertices
    bv = surface.boundary_vertices
    dist = ambient.boundary_distance(V[bv])
    if np.max(dist) > tol_bdry:
        raise OffBoundaryError(f"boundary vertex off the ambient boundary by {np.max(dist):.3e}")
    W = ambient.boundary_normal(V[bv])

    nrm = _fem.jet_normals(V, surface.triangles)
    nb = nrm[bv] - np.sum(nrm[bv] * W, axis=1)[:, None] * W
    nrm[bv] = nb / np.linalg.norm(nb, axis=1)[:, None]

    # conormal: averaged outward in-plane directions of the incident boundary edges
    _, fn, _ = _fem.element_geometry(V, surface.triangles)
    edge_face = {}
    for f, (a, b, c) in enumerate(surface.triangles.tolist()):
        edge_face[(a, b)] = f
        edge_face[(b, c)] = f
        edge_face[(c, a)] = f
    pos = {int(v): i for i, v in enumerate(bv)}
    acc = np.zeros((len(bv), 3))
    tang = np.zeros((len(bv), 3))
    for a, b in surface.boundary_edges.tolist():
        t = V[b] - V[a]
        out = np.cross(t, fn[edge_face[(a, b)]])
        out /= np.linalg.norm(out)
        tn = t / np.linalg.norm(t)
        for v in (a, b):
            acc[pos[v]] += out
            tang[pos[v]] += tn
    tang /= np.linalg.norm(tang, axis=1)[:, None]
    eta = acc - np.sum(acc * tang, axis=1)[:, None] * tang
    eta /= np.linalg.norm(eta, axis=1)[:, None]
    for arr in (nrm, eta, W):
        arr.setflags(write=False)
    return ImmersedSurface(surface, ambient, nrm, eta, W)


@dataclass(frozen=True)
class ValidationReport:
    mean_curvature_residual: float
    orthogonality_residual: float
    tol_min: float
    tol_orth: float
    passed: bool

    def as_dict(self) -> dict:
        return {
            "mean_curvature_residual": self.mean_curvature_residual,
            "orthogonality_residual": self.orthogonality_residual,
            "tol_min": self.tol_min,
            "tol_orth": self.tol_orth,
            "pass": self.passed,
        }


def mean_curvature_vectors(surface: TriangulatedSurface) -> np.ndarray:
    """Cotangent-Laplacian mean curvature vector at every vertex."""
    K = _fem.stiffness(surface.vertices, surface.triangles)
    A = _fem.vertex_areas(surface.vertices, surface.triangles)
    return -(K @ surface.vertices) / A[:, None]


def validate_free_boundary(immersed: ImmersedSurface, tol_min: float = 5e-2, tol_orth: float = 2e-2) -> ValidationReport:
    """Discrete minimality and orthogonality residuals.

    The mean-curvature residual is ``max |H| * (mean incident edge length)``
    over interior vertices; the orthogonality residual is
    ``max (1 - |<eta, W>|)`` over boundary vertices.
    """
    s = immersed.surface
    H = mean_curvature_vectors(s)
    E = s.edges
    L = np.linalg.norm(s.vertices[E[:, 0]] - s.vertices[E[:, 1]], axis=1)
    tot = np.zeros(s.n_vertices)
    cnt = np.zeros(s.n_vertices)
    for k in range(2):
        np.add.at(tot, E[:, k], L)
        np.add.at(cnt, E[:, k], 1.0)
    local_h = tot / cnt
    interior = ~s.boundary_mask
    hres = float(np.max(np.linalg.norm(H[interior], axis=1) * local_h[interior])) if interior.any() else 0.0
    ores = float(np.max(1.0 - np.abs(np.sum(immersed.conormals * immersed.boundary_normals, axis=1))))
    ores = max(ores, 0.0)
    return ValidationReport(hres, ores, tol_min, tol_orth, bool(hres <= tol_min and ores <= tol_orth))
