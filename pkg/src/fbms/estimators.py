"""scikit-learn style wrappers around the spectral and Sobolev routines.

The estimators take a surface, not a feature matrix, in ``fit``; they follow
the parameter and fitted-attribute conventions (``get_params``, trailing
underscore attributes, ``check_is_fitted``) so they compose with tooling
that relies on them.
"""
from __future__ import annotations

import warnings

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .ambient import ImmersedSurface, ambient_from_spec, immerse
from .errors import DimensionError, ParameterError
from .heat import boundary_trace_check, interpolation_check, sobolev_check
from .mesh import TriangulatedSurface
from .pipeline import FORM_BUILDERS
from .spectral import classify_spectrum, solve_spectrum

__all__ = ["MorseIndexEstimator", "SobolevRatioTransformer"]


def _as_immersed(X, ambient: str) -> ImmersedSurface:
    if isinstance(X, ImmersedSurface):
        return X
    if isinstance(X, TriangulatedSurface):
        return immerse(X, ambient_from_spec(ambient))
    raise ParameterError("fit expects a TriangulatedSurface or an ImmersedSurface")


class MorseIndexEstimator(BaseEstimator):
    """Index and nullity of a second-variation form.

    Parameters
    ----------
    form : {"area", "energy", "tangential", "robin"}
    k : int
        Number of lowest eigenvalues to compute.
    tol_zero : float, optional
        Zero tolerance; the solver default when None.
    ambient : str
        Ambient specification used when ``fit`` receives a bare mesh.

    Attributes
    ----------
    eigenvalues_ : ndarray
    index_ : int
    nullity_ : int
    tol_zero_ : float
    spectrum_ : Spectrum
    """

    def __init__(self, form="area", k=20, tol_zero=None, ambient="unit_ball"):
        self.form = form
        self.k = k
        self.tol_zero = tol_zero
        self.ambient = ambient

    def fit(self, X, y=None):
        if self.form not in FORM_BUILDERS:
            raise ParameterError(f"form must be one of {sorted(FORM_BUILDERS)}")
        im = _as_immersed(X, self.ambient)
        F = FORM_BUILDERS[self.form](im)
        spec = solve_spectrum(F, k=int(self.k), tol_zero=self.tol_zero, return_vectors=False)
        c = classify_spectrum(spec)
        self.spectrum_ = spec
        self.eigenvalues_ = spec.eigenvalues
        self.tol_zero_ = spec.tol_zero
        self.index_ = c.index
        self.nullity_ = c.nullity
        return self

    def transform(self, X=None):
        """The computed eigenvalues, shape ``(1, k)``."""
        check_is_fitted(self, "eigenvalues_")
        return self.eigenvalues_[None, :]

    def fit_transform(self, X, y=None):
        return self.fit(X, y).transform()


class SobolevRatioTransformer(TransformerMixin, BaseEstimator):
    """Maps scalar P1 fields on a fitted surface to inequality ratios.

    Parameters
    ----------
    kind : {"sobolev", "trace", "interpolation"}
    ambient : str
        Ambient specification used when ``fit`` receives a bare mesh.

    Notes
    -----
    ``transform`` takes an array of shape ``(n_fields, n_vertices)`` and
    returns one ratio per field. Fields that vanish identically raise.
    """

    _CHECKS = {"sobolev": sobolev_check, "trace": boundary_trace_check,
               "interpolation": interpolation_check}

    def __init__(self, kind="sobolev", ambient="unit_ball"):
        self.kind = kind
        self.ambient = ambient

    def fit(self, X, y=None):
        if self.kind not in self._CHECKS:
            raise ParameterError(f"kind must be one of {sorted(self._CHECKS)}")
        self.immersed_ = _as_immersed(X, self.ambient)
        self.n_vertices_ = self.immersed_.surface.n_vertices
        return self

    def transform(self, X):
        check_is_fitted(self, "immersed_")
        F = check_array(X, dtype=np.float64)
        if F.shape[1] != self.n_vertices_:
            raise DimensionError(f"fields have {F.shape[1]} values, surface has {self.n_vertices_} vertices")
        fn = self._CHECKS[self.kind]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return np.array([fn(self.immersed_, f)["ratio"] for f in F])
