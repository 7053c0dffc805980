"""Deterministic simulator of speculative vectorization with selective replay."""

__version__ = '0.1.0'
