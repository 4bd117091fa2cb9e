"""textlier: text outlier detection via a convolutional autoencoder over
sentence embeddings, with Gaussian-Mahalanobis and PCA baselines."""

__version__ = "0.1.0"
