"""Classical outlier scorers: Gaussian/Mahalanobis and PCA reconstruction error.

Both operate on mean-pooled document vectors (mean over non-padded sentence
rows) and score higher-is-more-anomalous. Binary decisions use a
distribution-free threshold: the 95th percentile of training scores.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .corpus import EmbeddedDocument
from .errors import NumericalError, ShapeError


@dataclass
class ScoredItem:
    doc_id: str
    score: float
    scorer: str  # mahalanobis | pca_recon | ae_recon


class GaussianModel:
    """Sample mean and (biased) covariance with a ridge for invertibility."""

    def __init__(self, mean: np.ndarray, covariance: np.ndarray,
                 regularization: float):
        self.mean = np.asarray(mean, dtype=np.float64)
        self.covariance = np.asarray(covariance, dtype=np.float64)
        self.regularization = regularization
        self.d = self.mean.shape[0]
        reg = self.covariance + regularization * np.eye(self.d)
        try:
            self._chol = np.linalg.cholesky(reg)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(
                "regularized covariance is not positive definite") from exc


def fit_gaussian(vectors: list[np.ndarray] | np.ndarray,
                 regularization: float = 1e-6) -> GaussianModel:
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError(f"need a non-empty (n, d) array, got shape {x.shape}")
    n, d = x.shape
    if n < d + 1:
        warnings.warn(
            f"only {n} vectors for dimension {d}; covariance is rank-deficient "
            "and relies on the regularizer", stacklevel=2)
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / n
    return GaussianModel(mean, cov, regularization)


def mahalanobis_sq(model: GaussianModel, x: np.ndarray) -> float:
    """(x - mu)^T (Sigma + eps I)^-1 (x - mu) via Cholesky solve."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.d,):
        raise ShapeError(f"expected dimension {model.d}, got shape {x.shape}")
    diff = x - model.mean
    # L L^T z = diff  =>  z = L^-T (L^-1 diff);  distance = ||L^-1 diff||^2
    y = np.linalg.solve(model._chol, diff)
    return float(y @ y)


def gaussian_density(model: GaussianModel, x: float) -> float:
    """Univariate normal density; multivariate density is out of scope."""
    if model.d != 1:
        raise ValueError(f"gaussian_density is univariate only, model has d={model.d}")
    var = float(model.covariance[0, 0]) + model.regularization
    if var <= 0:
        raise ValueError(f"variance must be positive, got {var}")
    z = (x - float(model.mean[0])) ** 2 / var
    return float(np.exp(-z / 2.0) / np.sqrt(2.0 * np.pi * var))


class PCAModel:
    def __init__(self, mean: np.ndarray, components: np.ndarray,
                 eigenvalues: np.ndarray):
        self.mean = np.asarray(mean, dtype=np.float64)
        self.components = np.asarray(components, dtype=np.float64)  # (k, d)
        self.eigenvalues = np.asarray(eigenvalues, dtype=np.float64)
        self.k, self.d = self.components.shape


def jacobi_eigh(a: np.ndarray, tol: float = 1e-10,
                max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues, eigenvectors) with eigenvectors in columns, sorted
    by non-increasing eigenvalue. Converged when the off-diagonal Frobenius
    norm drops below tol.
    """
    a = np.array(a, dtype=np.float64)
    d = a.shape[0]
    if a.shape != (d, d) or not np.allclose(a, a.T, atol=1e-12):
        raise ValueError("jacobi_eigh requires a symmetric square matrix")
    v = np.eye(d)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum((a - np.diag(np.diag(a))) ** 2))
        if off < tol:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                if abs(apq) < tol / (d * d + 1):
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot_p = c * a[:, p] - s * a[:, q]
                rot_q = s * a[:, p] + c * a[:, q]
                a[:, p], a[:, q] = rot_p, rot_q
                rot_p = c * a[p, :] - s * a[q, :]
                rot_q = s * a[p, :] + c * a[q, :]
                a[p, :], a[q, :] = rot_p, rot_q
                rot_p = c * v[:, p] - s * v[:, q]
                rot_q = s * v[:, p] + c * v[:, q]
                v[:, p], v[:, q] = rot_p, rot_q
    else:
        raise NumericalError(
            f"Jacobi eigendecomposition did not converge in {max_sweeps} sweeps")
    eigvals = np.diag(a).copy()
    order = np.argsort(eigvals)[::-1]
    return eigvals[order], v[:, order]


def fit_pca(vectors: list[np.ndarray] | np.ndarray, k: int) -> PCAModel:
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError(f"need at least 2 vectors in an (n, d) array, got {x.shape}")
    n, d = x.shape
    if not 1 <= k <= d:
        raise ValueError(f"k must be in [1, {d}], got {k}")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / n
    eigvals, eigvecs = jacobi_eigh(cov)
    eigvals = np.maximum(eigvals, 0.0)  # clip tiny negatives from roundoff
    return PCAModel(mean, eigvecs[:, :k].T, eigvals[:k])


def pca_recon_error(model: PCAModel, x: np.ndarray) -> float:
    """Squared norm of the residual after projecting onto the top-k subspace."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.d,):
        raise ShapeError(f"expected dimension {model.d}, got shape {x.shape}")
    centered = x - model.mean
    residual = centered - model.components.T @ (model.components @ centered)
    return float(residual @ residual)


def score_corpus(model: GaussianModel | PCAModel,
                 docs: list[EmbeddedDocument]) -> list[ScoredItem]:
    """Score each document's mean-pooled vector; order preserved."""
    if isinstance(model, GaussianModel):
        scorer, fn = "mahalanobis", mahalanobis_sq
    elif isinstance(model, PCAModel):
        scorer, fn = "pca_recon", pca_recon_error
    else:
        raise TypeError(f"unsupported model type {type(model).__name__}")
    return [ScoredItem(doc_id=d.id, score=fn(model, d.pooled()), scorer=scorer)
            for d in docs]


def percentile_threshold(train_scores: list[float], pct: float = 95.0) -> float:
    if not train_scores:
        raise ValueError("no training scores")
    return float(np.percentile(np.asarray(train_scores, dtype=np.float64), pct))
