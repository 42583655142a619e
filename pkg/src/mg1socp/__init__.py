"""Convexified M/G/1 queueing formulas and congested facility location as MISOCPs."""

__version__ = "0.1.0"
