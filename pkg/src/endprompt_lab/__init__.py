"""Desk-scale lab for end-prompt context extension under RoPE position interpolation."""

__version__ = "0.1.0"
