"""Monte Carlo model of single-photon frequency down-conversion with a TCSPC analysis engine."""
__version__ = "0.1.0"
