"""Monte Carlo runtime estimation for privacy-preserving mean protocols."""

__version__ = "0.1.0"
