"""L2-regularized logistic regression over standardized feature vectors.

Features are the 33-dim concatenation (32 latent dims + reconstruction
error) whose scales differ wildly, so standardization is fitted on the
training set and baked into the model. Full-batch gradient descent on a
strictly convex objective keeps training cheap and deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, TrainingError


@dataclass
class Standardizer:
    mean: np.ndarray
    std: np.ndarray  # entries < 1e-12 replaced by 1

    @classmethod
    def fit(cls, x: np.ndarray) -> "Standardizer":
        x = np.asarray(x, dtype=np.float64)
        mean = x.mean(axis=0)
        std = x.std(axis=0)
        std = np.where(std < 1e-12, 1.0, std)
        return cls(mean=mean, std=std)

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std


@dataclass
class LogisticModel:
    weights: np.ndarray
    bias: float
    lam: float
    threshold: float
    standardizer: Standardizer
    final_grad_norm: float = 0.0


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logreg_loss_grad(weights: np.ndarray, bias: float, x: np.ndarray,
                     y: np.ndarray, lam: float) -> tuple[float, np.ndarray, float]:
    """Mean cross-entropy + (lam/2)||w||^2 and its gradient (bias unpenalized)."""
    z = x @ weights + bias
    p = _sigmoid(z)
    eps = 1e-15
    ce = -np.mean(y * np.log(p + eps) + (1 - y) * np.log(1 - p + eps))
    loss = float(ce + 0.5 * lam * weights @ weights)
    resid = (p - y) / x.shape[0]
    grad_w = x.T @ resid + lam * weights
    grad_b = float(resid.sum())
    return loss, grad_w, grad_b


def train_logreg(features: list[tuple[np.ndarray, int]], lam: float = 1e-4,
                 epochs: int = 2000, lr: float = 0.1, seed: int = 0,
                 threshold: float = 0.5) -> LogisticModel:
    """Full-batch gradient descent; deterministic per seed.

    Callers handling imbalanced data should oversample upstream.
    """
    if not features:
        raise ValueError("no training features")
    labels = {lbl for _, lbl in features}
    if labels != {0, 1}:
        raise ValueError(f"need both classes present, got labels {labels}")
    x = np.asarray([np.asarray(f, dtype=np.float64).ravel() for f, _ in features])
    y = np.asarray([lbl for _, lbl in features], dtype=np.float64)
    std = Standardizer.fit(x)
    xs = std.transform(x)
    dim = xs.shape[1]
    rng = np.random.default_rng(seed)
    w = rng.normal(0.0, 0.01, size=dim)
    b = 0.0
    initial_loss, _, _ = logreg_loss_grad(w, b, xs, y, lam)
    loss = initial_loss
    grad_norm = np.inf
    for epoch in range(epochs):
        loss, gw, gb = logreg_loss_grad(w, b, xs, y, lam)
        if not np.isfinite(loss):
            raise TrainingError(f"logistic loss diverged at epoch {epoch}")
        w -= lr * gw
        b -= lr * gb
        grad_norm = float(np.sqrt(gw @ gw + gb * gb))
    if loss > initial_loss + 1e-12:
        raise TrainingError(
            f"final loss {loss:.6g} exceeds initial {initial_loss:.6g}; "
            "lower the learning rate")
    return LogisticModel(weights=w, bias=b, lam=lam, threshold=threshold,
                         standardizer=std, final_grad_norm=grad_norm)


def predict_proba(model: LogisticModel, feature: np.ndarray) -> float:
    x = np.asarray(feature, dtype=np.float64).ravel()
    if x.shape != model.weights.shape:
        raise ShapeError(
            f"feature length {x.shape[0]} != model dimension {model.weights.shape[0]}")
    xs = model.standardizer.transform(x)
    return float(_sigmoid(np.asarray([model.weights @ xs + model.bias]))[0])


def predict(model: LogisticModel, feature: np.ndarray) -> int:
    return 1 if predict_proba(model, feature) >= model.threshold else 0
