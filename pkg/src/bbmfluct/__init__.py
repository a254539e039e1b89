"""Monte Carlo engine and verification harness for critical branching
Brownian motion martingale fluctuations."""

__version__ = "0.1.0"
