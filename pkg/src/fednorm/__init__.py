"""Federated minimax simulator with normalized aggregation of heterogeneous local updates."""

__version__ = "0.1.0"
