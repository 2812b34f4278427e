"""Adapter from video + segmentation models to candidate/track NDJSON."""

__version__ = "0.1.0"
