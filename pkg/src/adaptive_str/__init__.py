"""Least-squares self-tuning regulator: simulation, estimation and the
polynomial stabilizability test."""

__version__ = "0.1.0"
