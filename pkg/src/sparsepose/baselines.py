"""PCA-subspace and single-Gaussian-prior reconstruction baselines.

Both operate in Euclidean pose space so benchmark MSEs are commensurable
with the sparse model's.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import container
from .dataset import PoseSet, check_mask
from .errors import DataError, FormatError, InvalidInputError


def _as_matrix(train) -> np.ndarray:
    if isinstance(train, PoseSet):
        return train.poses
    return np.asarray(train, dtype=float)


# --------------------------------------------------------------------------
# PCA subspace
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray        # (D, D) orthonormal columns, variance order
    eigenvalues: np.ndarray       # non-increasing
    retained: int                 # smallest count reaching the energy target

    @property
    def basis(self) -> np.ndarray:
        return self.components[:, :self.retained]

    def save(self, path: str | Path):
        container.write_model(
            path, kind=container.KIND_PCA, dim=self.mean.size,
            cols=self.components.shape[1], kappa=self.retained,
            blocks=[self.mean, self.eigenvalues, self.components.T.reshape(-1)],
            meta={"model": "pca", "retained": self.retained})

    @classmethod
    def load(cls, path: str | Path) -> "PcaModel":
        kind, dim, cols, retained, payload = container.read_model(path)
        if kind != container.KIND_PCA:
            raise FormatError("model container does not hold a PCA model",
                              path=str(path))
        mean = payload[:dim]
        eigenvalues = payload[dim:dim + cols]
        components = payload[dim + cols:].reshape(cols, dim).T.copy()
        return cls(mean, components, eigenvalues, int(retained))


def pca_fit(train, energy: float = 0.9) -> PcaModel:
    """Eigendecomposition of the centered covariance; keeps the smallest
    component count whose eigenvalue mass reaches the energy fraction."""
    Y = _as_matrix(train)
    m, dim = Y.shape
    if m < 2:
        raise InvalidInputError("PCA needs at least two training poses")
    mean = Y.mean(axis=0)
    centered = Y - mean
    cov = centered.T @ centered / (m - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.clip(eigvals[order], 0.0, None)
    eigvecs = eigvecs[:, order]
    total = float(eigvals.sum())
    if total <= 0.0:
        raise DataError("training data has zero variance; no principal directions")
    cum = np.cumsum(eigvals) / total
    retained = int(np.searchsorted(cum, energy) + 1)
    return PcaModel(mean, eigvecs, eigvals, retained)


def pca_reconstruct(model: PcaModel, y0, mask=None) -> np.ndarray:
    """Least-squares fit of the retained subspace to the masked entries."""
    y0 = np.asarray(y0, dtype=float)
    mask = check_mask(mask if mask is not None else np.ones(y0.size, dtype=bool),
                      y0.size)
    rows = int(mask.sum())
    if rows < 1:
        raise InvalidInputError("mask excludes every coordinate")
    basis = model.basis[mask]
    coeffs, *_ = np.linalg.lstsq(basis, y0[mask] - model.mean[mask], rcond=None)
    return model.mean + model.basis @ coeffs


# --------------------------------------------------------------------------
# Gaussian prior
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianPrior:
    mean: np.ndarray
    covariance: np.ndarray        # ridge-regularized, symmetric PD
    precision: np.ndarray

    def save(self, path: str | Path):
        container.write_model(
            path, kind=container.KIND_GAUSSIAN, dim=self.mean.size,
            cols=self.mean.size, kappa=0,
            blocks=[self.mean, self.covariance.reshape(-1)],
            meta={"model": "gaussian"})

    @classmethod
    def load(cls, path: str | Path) -> "GaussianPrior":
        kind, dim, _, _, payload = container.read_model(path)
        if kind != container.KIND_GAUSSIAN:
            raise FormatError("model container does not hold a Gaussian model",
                              path=str(path))
        mean = payload[:dim]
        cov = payload[dim:].reshape(dim, dim)
        return cls(mean, cov, np.linalg.inv(cov))


def gaussian_fit(train, ridge_scale: float = 1e-6) -> GaussianPrior:
    """Sample mean/covariance with a trace-scaled ridge for invertibility."""
    Y = _as_matrix(train)
    m, dim = Y.shape
    if m < 2:
        raise InvalidInputError("Gaussian fit needs at least two training poses")
    mean = Y.mean(axis=0)
    centered = Y - mean
    cov = centered.T @ centered / (m - 1)
    ridge = ridge_scale * float(np.trace(cov)) / dim
    if ridge <= 0.0:
        raise DataError("covariance has zero trace; data is degenerate")
    cov = cov + ridge * np.eye(dim)
    try:
        precision = np.linalg.inv(cov)
    except np.linalg.LinAlgError as e:
        raise DataError("covariance is singular even after regularization") from e
    return GaussianPrior(mean, cov, precision)


def gaussian_reconstruct(prior: GaussianPrior, y0, mask=None,
                         lam: float = 1.0) -> np.ndarray:
    """Minimizer of the prior Mahalanobis term plus lam times the masked
    squared observation error (closed-form linear solve)."""
    y0 = np.asarray(y0, dtype=float)
    dim = prior.mean.size
    mask = check_mask(mask if mask is not None else np.ones(dim, dtype=bool), dim)
    if lam < 0:
        raise InvalidInputError("lam must be non-negative")
    P = np.diag(mask.astype(float))
    lhs = prior.precision + lam * P
    rhs = prior.precision @ prior.mean + lam * (mask * y0)
    return np.linalg.solve(lhs, rhs)
