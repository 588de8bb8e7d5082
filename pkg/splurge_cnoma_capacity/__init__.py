"""Ergodic capacity of cooperative NOMA with an OAM side channel over Rician fading."""

__version__ = "0.1.0"
