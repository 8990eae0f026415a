"""Simulation and analysis of dispersion-based bandwidth probing over 802.11 links."""

__version__ = "0.1.0"
