"""Instrumented entropic optimal transport with certified convergence bounds."""

__version__ = "0.1.0"
