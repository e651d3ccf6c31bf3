"""Benchmark toolkit for contextual TV-genre prediction on experience-sampling logs."""

__version__ = "0.1.0"
