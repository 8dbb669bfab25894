"""Discrete-event simulator of cellular handoff assisted by wireless access points."""

__version__ = "0.1.0"
