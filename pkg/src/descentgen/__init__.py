"""Probabilistic aircraft descent generation on a total-energy physics core."""

__version__ = "0.1.0"
