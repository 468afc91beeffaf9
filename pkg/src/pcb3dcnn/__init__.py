"""Pre-crime behavior video segmentation and 3D CNN experiment toolkit."""

__version__ = "0.1.0"
