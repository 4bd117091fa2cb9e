"""embed-exporter: write textlier embedding files from a pretrained sentence
encoder."""

__version__ = "0.1.0"
