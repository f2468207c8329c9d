"""Simulation of a two-photon, four-qubit linear cluster state experiment."""

__version__ = "0.1.0"
