"""Credal-set laws of large numbers: bounds, adversarial simulation and exact oracles."""

__version__ = "0.1.0"
