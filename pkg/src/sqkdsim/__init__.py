"""Simulator for semi-quantum key distribution with a classical Bob."""
