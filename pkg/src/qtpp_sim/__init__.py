"""Monte Carlo simulator for the quantum three-pass key distribution protocol."""

__version__ = "0.1.0"
