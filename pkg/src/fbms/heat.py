"""Heat traces, heat-kernel comparisons, Sobolev-type ratios and closed-form index bounds."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla

from . import _fem
from .ambient import ImmersedSurface, ambient_bounds, mean_curvature_vectors
from .errors import GridError, ParameterError, SizeError, ZeroFieldError
from .forms import assemble_robin_form, assemble_scalar_robin
from .spectral import Spectrum

__all__ = [
    "HeatTrace",
    "default_t_grid",
    "heat_trace",
    "kernel_domination_check",
    "p1_abs_integral",
    "p1_abs_boundary_integral",
    "sobolev_check",
    "boundary_trace_check",
    "interpolation_check",
    "random_bump_fields",
    "ratio_statistics",
    "index_bound_objective",
    "golden_section_log",
    "index_bound_closed_form",
    "betti_bound_evaluator",
]

LOG_T_MIN = math.log(1e-4)
LOG_T_MAX = math.log(1e4)


def default_t_grid(lo: float = 1e-3, hi: float = 1e2, count: int = 32) -> np.ndarray:
    """Logarithmically spaced times."""
    if lo <= 0 or hi <= lo or count < 1:
        raise GridError("t grid needs 0 < lo < hi and count >= 1")
    return np.geomspace(lo, hi, count)


@dataclass(frozen=True, eq=False)
class HeatTrace:
    """Partial heat-trace sums ``k(t) = sum_l exp(-lambda_l t)``.

    ``remainder`` bounds the omitted tail by ``(reduced_dim - k) exp(-lambda_k t)``.
    """

    t_grid: np.ndarray
    values: np.ndarray
    source: str
    remainder: np.ndarray
    n_terms: int
    reduced_dim: int

    def is_log_convex(self, rtol: float = 1e-9) -> bool:
        """Discrete convexity of log k against t on the (possibly nonuniform) grid."""
        t, y = self.t_grid, np.log(self.values)
        if len(t) < 3:
            return True
        s = np.diff(y) / np.diff(t)
        return bool(np.all(np.diff(s) >= -rtol * np.maximum(1.0, np.abs(s[:-1]))))

    def is_nonincreasing(self) -> bool:
        return bool(np.all(np.diff(self.values) <= 1e-12 * self.values[:-1]))

    def rows(self) -> list:
        return [
            {"t": float(t), "k": float(k), "remainder": float(r)}
            for t, k, r in zip(self.t_grid, self.values, self.remainder)
        ]


def heat_trace(spectrum, t_grid, source: str = "bundle_robin") -> HeatTrace:
    """Heat trace from the computed eigenvalues of a spectrum.

    Parameters
    ----------
    spectrum : Spectrum or array of eigenvalues
    t_grid : positive times

    Raises
    ------
    GridError
        If any time is not positive.
    """
    t = np.asarray(t_grid, dtype=float).ravel()
    if t.size == 0 or np.any(t <= 0) or not np.all(np.isfinite(t)):
        raise GridError("heat-trace times must be positive and finite")
    if isinstance(spectrum, Spectrum):
        lam, dim = np.asarray(spectrum.eigenvalues, dtype=float), spectrum.reduced_dim
    else:
        lam = np.sort(np.asarray(spectrum, dtype=float))
        dim = len(lam)
    if lam.size == 0:
        raise GridError("empty spectrum")
    vals = np.exp(-np.outer(t, lam)).sum(axis=1)
    rem = max(dim - lam.size, 0) * np.exp(-lam[-1] * t)
    return HeatTrace(t, vals, source, rem, lam.size, dim)


# ----------------------------------------------------------------------------
# heat kernels


def _heat_kernels(A: np.ndarray, m: np.ndarray, t: float) -> np.ndarray:
    """Discrete kernel ``M^{-1/2} expm(-t M^{-1/2} A M^{-1/2}) M^{-1/2}`` for diagonal mass m."""
    s = 1.0 / np.sqrt(m)
    H = s[:, None] * A * s[None, :]
    H = 0.5 * (H + H.T)
    E = sla.expm(-t * H)
    return s[:, None] * E * s[None, :]


def _block_norms(KE: np.ndarray, nv: int) -> np.ndarray:
    blocks = KE.reshape(nv, 3, nv, 3).transpose(0, 2, 1, 3)
    return np.linalg.norm(blocks, ord=2, axis=(2, 3))


def kernel_domination_check(
    immersed: ImmersedSurface,
    t_grid: Optional[Sequence[float]] = None,
    max_dofs: int = 600,
    slack: float = 1e-8,
    alpha: Optional[float] = None,
    n_amb: int = 3,
) -> dict:
    """Compare the bundle and scalar Robin heat kernels on a coarse mesh.

    The bundle generator is the Robin rough Laplacian on admissible sections
    (boundary condition ``grad_eta V = II(V)``); the scalar generator is the
    Laplacian with ``dK/deta = alpha K``. Both use lumped mass, so the
    discrete kernels are ``M^{-1/2} expm(-t H) M^{-1/2}``.

    Every time t records:

    - ``domination_violation``: ``max_{x,y} (|K_E(x,y,t)| - K(x,y,t))`` with
      the spectral norm of the 3x3 block;
    - ``max_mass``: ``max_x int K(x, y, t) dA(y)``;
    - ``trace_bundle``, ``trace_scalar``: ``k_E(t)`` and ``k(t)`` of the discrete kernels.

    A second domination pass uses the Robin constant ``max{0, sup II}`` for
    the scalar kernel and is reported under ``sup_constant``.

    Raises
    ------
    SizeError
        If the reduced bundle dimension exceeds ``max_dofs``.
    """
    if t_grid is None:
        t_grid = default_t_grid()
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(t_grid <= 0):
        raise GridError("times must be positive")
    s = immersed.surface
    nv = s.n_vertices
    form = assemble_robin_form(immersed, lumped=True)
    Ar, Mr = form.reduced()
    if Ar.shape[0] > max_dofs:
        raise SizeError(f"{Ar.shape[0]} reduced degrees of freedom exceed max_dofs={max_dofs}")
    B = form.constraint_basis.toarray()
    mb = Mr.diagonal()
    Abun = Ar.toarray()
    if alpha is None:
        _, alpha = ambient_bounds(immersed.ambient, s.vertices[s.boundary_vertices])
    bv = s.boundary_vertices
    S = immersed.ambient.shape_matrix(s.vertices[bv])
    # largest eigenvalue of II on the tangent plane of the ambient boundary
    comp = _fem.orthonormal_complement(immersed.boundary_normals)
    sup_ii = float(np.max(np.linalg.eigvalsh(np.einsum("pia,pab,pjb->pij", comp, S, comp))[:, -1]))
    alpha_plus = max(0.0, sup_ii)
    ms = _fem.vertex_areas(s.vertices, s.triangles)

    def scalar(a):
        A, _ = assemble_scalar_robin(immersed, a, lumped=True)
        return A.toarray()

    As, Asp = scalar(alpha), scalar(alpha_plus)
    rows = []
    for t in t_grid:
        KE = B @ _heat_kernels(Abun, mb, t) @ B.T
        K = _heat_kernels(As, ms, t)
        Kp = _heat_kernels(Asp, ms, t)
        nrm = _block_norms(KE, nv)
        mass_rows = K @ ms
        rows.append({
            "t": float(t),
            "domination_violation": float(np.max(nrm - K)),
            "domination_pass": bool(np.max(nrm - K) <= slack),
            "sup_constant_violation": float(np.max(nrm - Kp)),
            "sup_constant_pass": bool(np.max(nrm - Kp) <= slack),
            "max_mass": float(np.max(mass_rows)),
            "min_mass": float(np.min(mass_rows)),
            "mass_pass": bool(np.max(mass_rows) <= 1.0 + slack),
            "min_scalar_kernel": float(np.min(K)),
            "trace_bundle": float(np.sum(np.diag(KE).reshape(nv, 3).sum(axis=1) * ms)),
            "trace_scalar": float(np.sum(np.diag(K) * ms)),
        })
    for r in rows:
        r["trace_ratio_pass"] = bool(r["trace_bundle"] <= (n_amb - 2) * r["trace_scalar"] * (1 + slack))
    return {
        "alpha": float(alpha),
        "alpha_plus": alpha_plus,
        "reduced_dim": int(Ar.shape[0]),
        "n_vertices": int(nv),
        "slack": slack,
        "rows": rows,
        "domination_pass": all(r["domination_pass"] for r in rows),
        "sup_constant_pass": all(r["sup_constant_pass"] for r in rows),
        "mass_pass": all(r["mass_pass"] for r in rows),
        "trace_ratio_pass": all(r["trace_ratio_pass"] for r in rows),
        "initial_mass": rows[0]["max_mass"] if rows else float("nan"),
    }


# ----------------------------------------------------------------------------
# exact P1 integrals of |phi|


def _positive_part_triangle(a, b, c):
    """Integral of max(phi, 0) over a unit-area triangle with vertex values a, b, c."""
    vals = np.sort(np.stack([a, b, c], axis=1), axis=1)[:, ::-1]
    p, q, r = vals[:, 0], vals[:, 1], vals[:, 2]
    out = np.zeros_like(p)
    allpos = r >= 0
    out[allpos] = (p + q + r)[allpos] / 3.0
    one = (p > 0) & (q <= 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out[one] = (p**3 / (3.0 * (p - q) * (p - r)))[one]
        two = (q > 0) & (r < 0)
        neg = -r
        out[two] = ((p + q + r) / 3.0 + neg**3 / (3.0 * (neg + p) * (neg + q)))[two]
    return out


def p1_abs_integral(vertices, triangles, phi) -> float:
    """Exact integral of |phi| for a P1 field."""
    area, _, _ = _fem.element_geometry(vertices, triangles)
    f = np.asarray(phi, dtype=float)[triangles]
    pos = _positive_part_triangle(f[:, 0], f[:, 1], f[:, 2])
    negp = _positive_part_triangle(-f[:, 0], -f[:, 1], -f[:, 2])
    return float(np.sum(area * (pos + negp)))


def p1_abs_boundary_integral(vertices, bedges, phi) -> float:
    """Exact integral of |phi| along boundary edges."""
    L = np.linalg.norm(vertices[bedges[:, 1]] - vertices[bedges[:, 0]], axis=1)
    a = np.asarray(phi, dtype=float)[bedges[:, 0]]
    b = np.asarray(phi, dtype=float)[bedges[:, 1]]
    same = a * b >= 0
    out = np.where(same, np.abs(a + b) / 2.0, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        mixed = (a * a + b * b) / (2.0 * np.abs(a - b))
    out = np.where(same, out, mixed)
    return float(np.sum(L * out))


def _gradient_l1(vertices, triangles, phi) -> float:
    area, _, grad = _fem.element_geometry(vertices, triangles)
    g = np.einsum("fik,fi->fk", grad, np.asarray(phi, dtype=float)[triangles])
    return float(np.sum(area * np.linalg.norm(g, axis=1)))


def _check_field(immersed, phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=float).ravel()
    if phi.shape[0] != immersed.surface.n_vertices:
        raise ValueError("field must have one value per vertex")
    if not np.any(phi != 0.0):
        raise ZeroFieldError("field is identically zero")
    return phi


def sobolev_check(immersed: ImmersedSurface, phi, n: int = 2) -> dict:
    """Ratio ``(int |phi|^2)^(1/2) / (int |grad phi| + int |phi|)`` for surfaces.

    Every integral is exact for P1 fields. The ratio is a lower estimate of
    the free-boundary Sobolev constant.
    """
    if n != 2:
        raise ParameterError("only surfaces (n = 2) are discretized")
    phi = _check_field(immersed, phi)
    s = immersed.surface
    M = _fem.mass(s.vertices, s.triangles)
    lhs = math.sqrt(float(phi @ (M @ phi)))
    grad = _gradient_l1(s.vertices, s.triangles, phi)
    l1 = p1_abs_integral(s.vertices, s.triangles, phi)
    return {"lhs": lhs, "rhs_gradient_part": grad, "rhs_l1_part": l1, "ratio": lhs / (grad + l1)}


def boundary_trace_check(immersed: ImmersedSurface, phi) -> dict:
    """Ratio ``int_bdry |phi| / (int |grad phi| + int |H phi| + int |phi|)``."""
    phi = _check_field(immersed, phi)
    s = immersed.surface
    b = p1_abs_boundary_integral(s.vertices, s.boundary_edges, phi)
    grad = _gradient_l1(s.vertices, s.triangles, phi)
    l1 = p1_abs_integral(s.vertices, s.triangles, phi)
    H = np.linalg.norm(mean_curvature_vectors(s), axis=1)
    H[s.boundary_mask] = 0.0
    hterm = float(np.sum(_fem.vertex_areas(s.vertices, s.triangles) * H * np.abs(phi)))
    interior = grad + hterm + l1
    return {"boundary_l1": b, "interior_terms": interior, "gradient_part": grad,
            "mean_curvature_part": hterm, "l1_part": l1, "ratio": b / interior}


def interpolation_check(immersed: ImmersedSurface, phi) -> dict:
    """Ratio ``(int phi^2)^(3/2) / int |phi|`` over ``int |grad phi|^2 + int phi^2``.

    Its supremum over fields is an admissible common value for ``c1 = c2`` in
    the interpolated inequality used by the closed-form index bound.
    """
    phi = _check_field(immersed, phi)
    s = immersed.surface
    M = _fem.mass(s.vertices, s.triangles)
    K = _fem.stiffness(s.vertices, s.triangles)
    l2 = float(phi @ (M @ phi))
    lhs = l2**1.5 / p1_abs_integral(s.vertices, s.triangles, phi)
    rhs = float(phi @ (K @ phi)) + l2
    return {"lhs": lhs, "rhs": rhs, "ratio": lhs / rhs}


def random_bump_fields(immersed: ImmersedSurface, count: int = 100, seed: int = 0) -> np.ndarray:
    """Seeded Gaussian bumps of ambient position, one field per row.

    Centres are uniform in the bounding box, widths log-uniform in
    [0.2, 0.8] times the box diameter, signs random. The fields are analytic
    in the ambient coordinates, so they are the same functions on every
    refinement of a surface.
    """
    rng = np.random.default_rng(seed)
    P = immersed.surface.vertices
    lo, hi = P.min(axis=0), P.max(axis=0)
    diam = float(np.linalg.norm(hi - lo))
    centres = lo + rng.random((count, 3)) * (hi - lo)
    widths = diam * np.exp(rng.uniform(math.log(0.2), math.log(0.8), count))
    signs = rng.choice([-1.0, 1.0], count)
    offsets = rng.uniform(-0.5, 0.5, count)
    d2 = np.sum((P[None, :, :] - centres[:, None, :]) ** 2, axis=2)
    return signs[:, None] * np.exp(-d2 / (2 * widths[:, None] ** 2)) + offsets[:, None]


def ratio_statistics(immersed: ImmersedSurface, count: int = 100, seed: int = 0) -> dict:
    """Sup/mean/min of the Sobolev, trace and interpolation ratios over random fields."""
    fields = random_bump_fields(immersed, count, seed)
    out = {}
    for name, fn in (("sobolev", sobolev_check), ("trace", boundary_trace_check),
                     ("interpolation", interpolation_check)):
        r = np.array([fn(immersed, f)["ratio"] for f in fields])
        out[name] = {"max": float(r.max()), "mean": float(r.mean()), "min": float(r.min())}
    out["count"] = count
    out["seed"] = seed
    out["provenance"] = "empirical"
    return out


# ----------------------------------------------------------------------------
# closed-form bounds


def _check_bound_params(area, rho, c1, c2, n_amb):
    if area < 0 or rho < 0 or c1 <= 0 or c2 <= 0 or n_amb < 3:
        raise ParameterError("need area >= 0, rho >= 0, c1 > 0, c2 > 0, n_amb >= 3")


def index_bound_objective(t, area, rho, c1, c2, n_amb=3, mode="dim2", n=3, p_integral=0.0):
    """Logarithm of the objective minimized by the closed-form bounds.

    dim2: ``(n_amb - 2) c2^2 e^{rho t} / (1 - e^{-c2 t / (2 c1)})^2 * area``;
    dimN: ``c2^{n/2} e^{2t} / (1 - e^{-4 c2 t / (n c1)})^{n/2} * p_integral``.
    """
    t = np.asarray(t, dtype=float)
    if mode == "dim2":
        return (math.log((n_amb - 2) * c2 * c2 * area) + rho * t
                - 2.0 * np.log(-np.expm1(-c2 * t / (2.0 * c1))))
    return (0.5 * n * math.log(c2) + math.log(p_integral) + 2.0 * t
            - 0.5 * n * np.log(-np.expm1(-4.0 * c2 * t / (n * c1))))


def golden_section_log(fun, lo: float = LOG_T_MIN, hi: float = LOG_T_MAX, tol: float = 1e-10):
    """Minimize ``fun(exp(x))`` for x in [lo, hi] by golden-section search.

    Returns ``(x_min, f_min)``; stops when the bracket is below
    ``tol * max(1, |x|)``.
    """
    g = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = float(fun(math.exp(c))), float(fun(math.exp(d)))
    while (b - a) > tol * max(1.0, abs(a), abs(b)):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = float(fun(math.exp(c)))
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = float(fun(math.exp(d)))
    x = 0.5 * (a + b)
    f = float(fun(math.exp(x)))
    # an end of the interval wins ties: the objective is flat there only when monotone
    for xe in (lo, hi):
        fe = float(fun(math.exp(xe)))
        if fe <= f:
            x, f = xe, fe
    return x, f


def index_bound_closed_form(area: float, rho: float, c1: float, c2: float, n_amb: int = 3,
                            mode: str = "dim2", n: int = 3, p_integral: float = 0.0,
                            tol: float = 1e-10) -> dict:
    """Minimize the closed-form index bound over t in [1e-4, 1e4].

    Parameters
    ----------
    area : float
        Surface area (dim2 mode).
    rho, c1, c2 : float
        Curvature bound and Sobolev-type constants.
    n_amb : int
        Ambient dimension (dim2 mode prefactor ``n_amb - 2``).
    mode : {"dim2", "dimN"}
    n : int
        Intrinsic dimension for dimN mode (``>= 3``).
    p_integral : float
        ``int max{1, |S|}^{n/2}`` for dimN mode.

    Returns
    -------
    dict
        ``bound``, ``t_star`` and ``at_boundary`` (the minimizer is an end of
        the search interval, for instance the t -> infinity limit when rho = 0).
    """
    _check_bound_params(area, rho, c1, c2, n_amb)
    if mode not in ("dim2", "dimN"):
        raise ParameterError(f"unknown mode {mode!r}")
    if mode == "dimN" and (n < 3 or p_integral < 0):
        raise ParameterError("dimN mode needs n >= 3 and p_integral >= 0")
    scale = area if mode == "dim2" else p_integral
    if scale == 0.0:
        return {"bound": 0.0, "t_star": float("nan"), "at_boundary": False, "mode": mode}

    def fun(t):
        return index_bound_objective(t, area, rho, c1, c2, n_amb, mode, n, p_integral)

    x, _ = golden_section_log(fun, tol=tol)
    at_b = x in (LOG_T_MIN, LOG_T_MAX)
    t = 1e4 if x == LOG_T_MAX else (1e-4 if x == LOG_T_MIN else math.exp(x))
    if mode == "dim2":
        bound = (n_amb - 2) * c2 * c2 * math.exp(rho * t) / math.expm1(-c2 * t / (2.0 * c1)) ** 2 * area
    else:
        bound = c2 ** (0.5 * n) * math.exp(2.0 * t) / (-math.expm1(-4.0 * c2 * t / (n * c1))) ** (0.5 * n) * p_integral
    return {"bound": bound, "t_star": t, "at_boundary": at_b, "mode": mode}


def betti_bound_evaluator(n: int, p_integral: float, c3: float) -> float:
    """Right-hand side ``c3 * int max{1, |R_m|}^{n/2} dA`` of the Betti-number bound."""
    if n < 3 or p_integral < 0 or c3 <= 0:
        raise ParameterError("need n >= 3, p_integral >= 0 and c3 > 0")
    return c3 * p_integral
