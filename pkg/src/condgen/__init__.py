"""Generate in-group asset condition data and use it for reliability studies."""

__version__ = "0.1.0"
