"""Concept-bottleneck workbench for chest X-ray pathology detection."""

__version__ = "0.1.0"
