"""Sparse-coding pose engine: dictionary learning, pose synthesis from noisy
or incomplete inputs, benchmarking, and an interactive posing service."""

__version__ = "0.1.0"
