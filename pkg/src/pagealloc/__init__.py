"""Reinforcement-learning allocators for a single memory page."""

__version__ = "0.1.0"
