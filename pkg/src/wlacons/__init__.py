"""Resilient consensus by weight learning, with a clock synchronization application."""

__version__ = "0.1.0"
