"""Quantum-inspired evolutionary optimization for l0-constrained regression."""
__version__ = "0.1.0"
