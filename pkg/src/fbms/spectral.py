"""Constrained generalized eigenproblems and index/nullity classification."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import AmbiguityWarning, ConvergenceError, DimensionError, TruncationWarning
from .forms import FormAssembly

__all__ = [
    "Spectrum",
    "Classification",
    "solve_spectrum",
    "solve_pencil",
    "classify_spectrum",
    "beta_count",
    "default_tol_zero",
    "richardson_eigenvalues",
    "confirm_by_refinement",
]

DENSE_LIMIT = 2000
RESIDUAL_TOL = 1e-8
MAX_RESTARTS = 6
DEFAULT_K = 20


def default_tol_zero(eigenvalues: np.ndarray, rel: float = 1e-2, floor: float = 1e-9) -> float:
    """``rel * |most negative eigenvalue|``, never below ``floor``."""
    neg = eigenvalues[eigenvalues < 0]
    return max(floor, rel * float(np.max(np.abs(neg)))) if neg.size else floor


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Lowest eigenvalues of a reduced pencil.

    Attributes
    ----------
    eigenvalues : ndarray
        Ascending.
    eigenvectors : ndarray or None
        Columns in constraint-reduced coordinates, M-orthonormal.
    tol_zero : float
    mesh_scale : float
        Mean edge length of the underlying mesh (0 for abstract pencils).
    reduced_dim : int
    residuals : ndarray
        ``|A v - lambda M v| / |M v|`` per pair.
    """

    eigenvalues: np.ndarray
    eigenvectors: Optional[np.ndarray]
    tol_zero: float
    mesh_scale: float = 0.0
    reduced_dim: int = 0
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    method: str = "dense"
    form_kind: str = ""

    @property
    def k(self) -> int:
        return len(self.eigenvalues)

    def as_dict(self) -> dict:
        return {
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "tol_zero": self.tol_zero,
            "mesh_scale": self.mesh_scale,
            "reduced_dim": self.reduced_dim,
            "max_residual": float(np.max(self.residuals)) if self.residuals.size else 0.0,
            "method": self.method,
            "form_kind": self.form_kind,
        }


def _residuals(A, M, w, V) -> np.ndarray:
    AV = A @ V
    MV = M @ V
    return np.linalg.norm(AV - MV * w[None, :], axis=0) / np.linalg.norm(MV, axis=0)


def _count_below(A: sp.spmatrix, M: sp.spmatrix, sigma: float) -> int:
    """Number of eigenvalues of the pencil below sigma (Sylvester inertia of A - sigma M)."""
    S = (A - sigma * M).tocsc()
    lu = spla.splu(S, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                   options={"SymmetricMode": True})
    d = lu.U.diagonal()
    return int(np.sum(d < 0))


def _sparse_lowest(A, M, k: int, sigma: float):
    """Lowest k eigenpairs by shift-invert Lanczos, lowering sigma until nothing lies below it."""
    Ac, Mc = A.tocsc(), M.tocsc()
    n = A.shape[0]
    v0 = np.ones(n) / np.sqrt(n)
    for _ in range(MAX_RESTARTS):
        try:
            below = _count_below(A, M, sigma)
        except RuntimeError:
            sigma -= 1.0 + abs(sigma)
            continue
        # eigenvalues below sigma are found too: ask for enough of them
        kk = min(n - 1, k + below)
        try:
            w, V = spla.eigsh(Ac, k=kk, M=Mc, sigma=sigma, which="LM", v0=v0, tol=1e-12)
        except spla.ArpackNoConvergence as exc:
            raise ConvergenceError(f"Lanczos failed to converge: {exc}") from exc
        order = np.argsort(w)
        w, V = w[order], V[:, order]
        if below == 0 or np.sum(w < sigma) == below:
            return w[:k], V[:, :k]
        sigma = float(w[0]) - (1.0 + abs(float(w[0])))
    raise ConvergenceError("could not bracket the bottom of the spectrum")


def solve_pencil(A, M, k: int = DEFAULT_K, sigma: float = -1.0, dense: Optional[bool] = None,
                 return_vectors: bool = True):
    """Lowest k eigenpairs of ``A v = lambda M v`` with symmetric A and SPD M."""
    n = A.shape[0]
    if k < 1 or k > n:
        raise DimensionError(f"requested {k} eigenpairs from a {n}-dimensional problem")
    use_dense = n < DENSE_LIMIT if dense is None else dense
    if use_dense or k >= n - 1:
        Ad = A.toarray() if sp.issparse(A) else np.asarray(A)
        Md = M.toarray() if sp.issparse(M) else np.asarray(M)
        w, V = sla.eigh(Ad, Md, subset_by_index=[0, k - 1])
        method = "dense"
    else:
        w, V = _sparse_lowest(sp.csr_matrix(A), sp.csr_matrix(M), k, sigma)
        method = "lanczos"
    res = _residuals(A, M, w, V)
    scale = np.maximum(1.0, np.abs(w))
    if np.any(res > RESIDUAL_TOL * scale):
        raise ConvergenceError(f"eigenpair residual {np.max(res / scale):.3e} exceeds {RESIDUAL_TOL}")
    return w, (V if return_vectors else None), res, method


def solve_spectrum(form: FormAssembly, k: int = DEFAULT_K, tol_zero: Optional[float] = None,
                   rho: float = 0.0, dense: Optional[bool] = None, return_vectors: bool = True) -> Spectrum:
    """Lowest k eigenvalues of the constrained pencil of ``form``.

    Parameters
    ----------
    form : FormAssembly
    k : int
        Number of eigenpairs; clamped to the reduced dimension.
    tol_zero : float, optional
        Zero-classification tolerance. Defaults to ``1e-2 * |lambda_min|``
        when a negative eigenvalue exists, floor ``1e-9``.
    rho : float
        Curvature bound; the initial shift-invert pole is ``-(1 + rho)``.
    dense : bool, optional
        Force (True) or forbid (False) the dense solver; by default dense below
        2000 reduced DOFs.
    """
    A, M = form.reduced()
    k = min(k, A.shape[0])
    w, V, res, method = solve_pencil(A, M, k, sigma=-(1.0 + rho), dense=dense, return_vectors=return_vectors)
    tz = default_tol_zero(w) if tol_zero is None else float(tol_zero)
    h = form.immersed.surface.mean_edge_length() if form.immersed is not None else 0.0
    return Spectrum(w, V, tz, h, A.shape[0], res, method, form.form_kind)


@dataclass(frozen=True)
class Classification:
    index: int
    nullity: int
    gap_below: float
    gap_above: float
    ambiguous: bool

    def as_dict(self) -> dict:
        return {"index": self.index, "nullity": self.nullity, "gap_below": self.gap_below,
                "gap_above": self.gap_above, "ambiguous": self.ambiguous}


def classify_eigenvalues(w: Sequence[float], tol_zero: float) -> Classification:
    w = np.asarray(w, dtype=float)
    index = int(np.sum(w < -tol_zero))
    nullity = int(np.sum(np.abs(w) <= tol_zero))
    near = np.abs(np.abs(w) - tol_zero) <= 0.1 * tol_zero
    neg = w[w < -tol_zero]
    pos = w[w > tol_zero]
    gap_below = float(np.min(np.abs(neg))) if neg.size else float("inf")
    gap_above = float(np.min(pos)) if pos.size else float("inf")
    amb = bool(np.any(near))
    if amb:
        warnings.warn(f"eigenvalue within 10% of tol_zero={tol_zero:.3e}; classification unstable",
                      AmbiguityWarning, stacklevel=3)
    return Classification(index, nullity, gap_below, gap_above, amb)


def classify_spectrum(spectrum: Spectrum) -> Classification:
    """Index = #(lambda < -tol_zero), nullity = #(|lambda| <= tol_zero).

    The gaps are the distances to the nearest eigenvalue classified negative
    and positive, for refinement-stability reporting.
    """
    c = classify_eigenvalues(spectrum.eigenvalues, spectrum.tol_zero)
    if spectrum.k and c.index + c.nullity == spectrum.k and spectrum.k < spectrum.reduced_dim:
        warnings.warn("all computed eigenvalues are nonpositive; increase k", TruncationWarning, stacklevel=2)
    return c


def beta_count(spectrum: Spectrum, rho: float) -> int:
    """Number of eigenvalues ``<= rho + tol_zero`` of the Robin form spectrum."""
    w = spectrum.eigenvalues
    b = int(np.sum(w <= rho + spectrum.tol_zero))
    if b == spectrum.k and spectrum.k < spectrum.reduced_dim:
        warnings.warn(f"beta clamped at the {spectrum.k} computed eigenvalues", TruncationWarning, stacklevel=2)
    return b


def richardson_eigenvalues(coarse: Spectrum, fine: Spectrum, order: float = 2.0) -> np.ndarray:
    """Extrapolate eigenvalues from two meshes assuming O(h^order) convergence."""
    n = min(coarse.k, fine.k)
    r = (coarse.mesh_scale / fine.mesh_scale) ** order if fine.mesh_scale > 0 else 4.0
    return (r * fine.eigenvalues[:n] - coarse.eigenvalues[:n]) / (r - 1.0)


def confirm_by_refinement(spectra: Sequence[Spectrum]) -> dict:
    """Classification across a refinement sequence.

    Every level is classified with its own tol_zero; the counts are stable
    when all levels agree. The Richardson extrapolation of the two finest
    levels is classified with the finest tolerance as a confirmation that near
    zero eigenvalues are converging to zero rather than to a nonzero limit.
    """
    levels = [classify_eigenvalues(s.eigenvalues, s.tol_zero) for s in spectra]
    out = {
        "levels": [c.as_dict() for c in levels],
        "stable": len({(c.index, c.nullity) for c in levels}) == 1,
    }
    if len(spectra) >= 2:
        ext = richardson_eigenvalues(spectra[-2], spectra[-1])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", AmbiguityWarning)
            ce = classify_eigenvalues(ext, spectra[-1].tol_zero)
        out["extrapolated"] = ce.as_dict()
        out["extrapolated_eigenvalues"] = [float(x) for x in ext]
    return out
