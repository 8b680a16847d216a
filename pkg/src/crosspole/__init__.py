"""Modelling, tuning and simulation of a cross-type four-pole hybrid levitation magnet."""

__version__ = "0.1.0"
