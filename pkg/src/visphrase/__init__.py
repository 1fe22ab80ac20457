"""Zero-shot labeling of images with adjectives and nouns via cross-modal
projection and phrase decomposition."""

__version__ = "0.1.0"
