"""relhyp: finite-window workbench for relatively hyperbolic groups."""

__version__ = "0.1.0"
