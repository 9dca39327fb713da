"""longattn: attention variants and a toy CTC pipeline for studying
train/test sequence-length mismatch."""

__version__ = "0.1.0"
