"""Quotients of jump-diffusion processes and the fat tails of relative price changes."""

__version__ = "0.1.0"
