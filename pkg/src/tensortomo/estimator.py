"""Scikit-learn style wrapper around the truncated SVE reconstructor."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import InputDomainError
from .forward import Sinogram
from .sve import assemble_forward, build_basis, factorize, reconstruct

__all__ = ["TruncatedSVEReconstructor"]


class TruncatedSVEReconstructor(BaseEstimator, TransformerMixin):
    """Truncated singular value expansion inversion as a transformer.

    ``fit`` assembles and factorizes the discretized forward operator;
    ``transform`` maps flattened sinogram rows of shape
    (n_samples, s_count * phi_count) to basis-coefficient rows.  Use
    :meth:`predict_field` to materialize a single reconstruction as a
    tensor field on a grid.
    """

    def __init__(self, rank: int = 2, n_rad: int = 20, k_ang: int = 16,
                 s_count: int = 64, phi_count: int = 48,
                 m_trunc: int | None = None, grid_n: int = 257):
        self.rank = rank
        self.n_rad = n_rad
        self.k_ang = k_ang
        self.s_count = s_count
        self.phi_count = phi_count
        self.m_trunc = m_trunc
        self.grid_n = grid_n

    def fit(self, X=None, y=None):
        basis = build_basis(self.rank, self.n_rad, self.k_ang, self.grid_n)
        self.system_ = factorize(assemble_forward(basis, self.s_count,
                                                  self.phi_count))
        self.n_features_in_ = self.s_count * self.phi_count
        return self

    def _check_fitted(self):
        if not hasattr(self, "system_"):
            raise InputDomainError("call fit before using the reconstructor")

    def transform(self, X):
        """Map flattened sinograms to truncated basis coefficients."""
        self._check_fitted()
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise InputDomainError(
                f"expected rows of length {self.n_features_in_}")
        sys = self.system_
        m = self.m_trunc or sys.default_truncation
        if not 1 <= m <= sys.kept:
            raise InputDomainError("truncation index out of range")
        u = sys.u[:, :m]
        sv = sys.singular_values[:m]
        v = sys.v[:, :m]
        return (X * sys.row_weight) @ u / sv @ v.T

    def predict_field(self, values: np.ndarray, grid_n: int | None = None):
        """Reconstruct one sinogram (2-d values array) as a TensorField."""
        self._check_fitted()
        sys = self.system_
        g = Sinogram(sys.s_grid, sys.phi_grid,
                     np.asarray(values, dtype=float), rank=self.rank)
        return reconstruct(g, sys, self.m_trunc, grid_n or self.grid_n)
