"""Convolutional autoencoder over (1, max_sent, embed_dim) document matrices.

Encoder: a stack of stride-2 3x3 convolutions (one per entry in the channel
plan) with ReLU, then a dense layer to the latent code. Decoder mirrors it:
dense from the latent, then [upsample2x -> conv -> ReLU] per stage with a
final linear conv back to one channel. Each stride-2 stage halves both
spatial dims, so max_sent and embed_dim must be divisible by 2^len(channels).

A document's feature vector is its latent code with the reconstruction MSE
appended (latent_dim + 1 values).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .corpus import EmbeddedDocument
from .errors import ShapeError, TrainingError


@dataclass
class AEConfig:
    max_sent: int = 32
    embed_dim: int = 768
    latent_dim: int = 32
    channels: tuple[int, ...] = (8, 16, 32)
    epochs: int = 50
    batch_size: int = 32
    lr: float = 1e-3
    seed: int = 0
    masked_loss: bool = False  # off by default: plain MSE over all cells

    def __post_init__(self):
        self.channels = tuple(self.channels)
        if min(self.max_sent, self.embed_dim, self.latent_dim,
               self.epochs, self.batch_size) < 1:
            raise ValueError("AEConfig integer fields must be positive")
        factor = 2 ** len(self.channels)
        if self.max_sent % factor or self.embed_dim % factor:
            raise ValueError(
                f"max_sent ({self.max_sent}) and embed_dim ({self.embed_dim}) "
                f"must be divisible by {factor} for {len(self.channels)} "
                "stride-2 stages")

    @property
    def bottleneck_spatial(self) -> tuple[int, int]:
        factor = 2 ** len(self.channels)
        return self.max_sent // factor, self.embed_dim // factor

    def to_dict(self) -> dict:
        return {"max_sent": self.max_sent, "embed_dim": self.embed_dim,
                "latent_dim": self.latent_dim, "channels": list(self.channels),
                "epochs": self.epochs, "batch_size": self.batch_size,
                "lr": self.lr, "seed": self.seed, "masked_loss": self.masked_loss}

    @classmethod
    def from_dict(cls, d: dict) -> "AEConfig":
        return cls(**{**d, "channels": tuple(d.get("channels", (8, 16, 32)))})


@dataclass
class FeatureVector:
    latent: np.ndarray
    recon_error: float
    doc_id: str

    def payload(self) -> np.ndarray:
        """Latent code with the reconstruction error appended."""
        return np.concatenate([self.latent, [self.recon_error]])


class AutoencoderModel:
    def __init__(self, config: AEConfig, rng: np.random.Generator | None = None):
        self.config = config
        self.training_log: list[float] = []
        if rng is None:
            rng = np.random.default_rng(config.seed)
        ch = config.channels
        bh, bw = config.bottleneck_spatial
        flat = ch[-1] * bh * bw
        enc: list[nn.Layer] = []
        prev = 1
        for c in ch:
            enc.append(nn.Conv2D(prev, c, 3, 3, stride=2, padding=1, rng=rng))
            enc.append(nn.ReLU())
            prev = c
        enc.append(nn.Flatten())
        enc.append(nn.Dense(flat, config.latent_dim, rng=rng))
        dec: list[nn.Layer] = [nn.Dense(config.latent_dim, flat, rng=rng),
                               nn.Reshape((ch[-1], bh, bw))]
        rev = list(ch[::-1][1:]) + [1]
        prev = ch[-1]
        for i, c in enumerate(rev):
            dec.append(nn.Upsample2x())
            dec.append(nn.Conv2D(prev, c, 3, 3, stride=1, padding=1, rng=rng))
            if i < len(rev) - 1:
                dec.append(nn.ReLU())  # final conv stays linear
            prev = c
        self.encoder = enc
        self.decoder = dec

    @property
    def layers(self) -> list[nn.Layer]:
        return self.encoder + self.decoder

    @property
    def parameters(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.parameters]

    @property
    def gradients(self) -> list[np.ndarray]:
        return [g for layer in self.layers for g in layer.gradients]

    def _check_doc(self, doc: EmbeddedDocument) -> np.ndarray:
        cfg = self.config
        if doc.matrix.shape != (cfg.max_sent, cfg.embed_dim):
            raise ShapeError(
                f"document {doc.id!r} has shape {doc.matrix.shape}, model "
                f"expects ({cfg.max_sent}, {cfg.embed_dim})")
        return doc.matrix[None, :, :]

    def forward(self, x: np.ndarray) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            upstream = layer.backward(upstream)
        return upstream


def encode(model: AutoencoderModel, doc: EmbeddedDocument) -> np.ndarray:
    x = model._check_doc(doc)
    for layer in model.encoder:
        x = layer.forward(x)
    return x


def reconstruct(model: AutoencoderModel,
                doc: EmbeddedDocument) -> tuple[np.ndarray, float]:
    x = model._check_doc(doc)
    out = model.forward(x)
    loss, _ = nn.mse_loss(out, x)
    return out, loss


def featurize(model: AutoencoderModel, doc: EmbeddedDocument) -> FeatureVector:
    latent = encode(model, doc)
    _, err = reconstruct(model, doc)
    return FeatureVector(latent=latent, recon_error=err, doc_id=doc.id)


def train_autoencoder(docs: list[EmbeddedDocument],
                      config: AEConfig) -> AutoencoderModel:
    """Mini-batch Adam training to minimize reconstruction MSE.

    Gradients are averaged over the batch (one Adam step per batch); epoch
    order is reshuffled from the config seed, so runs are bit-reproducible.
    """
    if not docs:
        raise ValueError("no documents to train on")
    shapes = {d.matrix.shape for d in docs}
    if shapes != {(config.max_sent, config.embed_dim)}:
        raise ShapeError(
            f"documents have shapes {sorted(shapes)}, config expects "
            f"({config.max_sent}, {config.embed_dim})")
    rng = np.random.default_rng(config.seed)
    model = AutoencoderModel(config, rng=rng)
    params = model.parameters
    state = nn.AdamState(params, lr=config.lr)
    inputs = [d.matrix[None, :, :] for d in docs]
    masks = None
    if config.masked_loss:
        masks = []
        for d in docs:
            m = np.zeros_like(d.matrix[None, :, :])
            m[:, :d.sentence_count, :] = 1.0
            masks.append(m)
    n = len(inputs)
    batch_grads = [np.zeros_like(p) for p in params]
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            batch = order[start:start + config.batch_size]
            for g in batch_grads:
                g[...] = 0.0
            for idx in batch:
                x = inputs[idx]
                out = model.forward(x)
                if masks is not None:
                    m = masks[idx]
                    active = max(m.sum(), 1.0)
                    diff = (out - x) * m
                    loss = float((diff ** 2).sum() / active)
                    grad = 2.0 * diff / active
                else:
                    loss, grad = nn.mse_loss(out, x)
                epoch_loss += loss
                model.backward(grad)
                for g, lg in zip(batch_grads, model.gradients):
                    g += lg
            for g in batch_grads:
                g /= len(batch)
            nn.adam_step(params, batch_grads, state)
        mean_loss = epoch_loss / n
        if not np.isfinite(mean_loss):
            raise TrainingError(f"training diverged at epoch {epoch}")
        model.training_log.append(mean_loss)
    return model
