"""Spectral graph rewiring: commute-time and spectral-gap layers, resistance
diagnostics, sparsification, curvature and a small GNN harness."""

__version__ = "0.1.0"
