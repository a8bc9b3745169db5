"""Simulation of dynamically-decoupled, individually-addressed microwave gate
interactions in trapped-ion chains."""

__version__ = "0.1.0"
