"""Metric 3D reconstruction of net-sport scenes, spatial QA generation, and scoring."""

__version__ = "0.1.0"
