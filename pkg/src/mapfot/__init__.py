"""Anonymous multi-agent path finding as Markovian multi-marginal optimal transport."""

__version__ = "0.1.0"
