"""Strong-tie prediction from motif counts in a dense weak-tie graph."""

__version__ = "0.1.0"
