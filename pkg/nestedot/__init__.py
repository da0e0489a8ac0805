"""Scenario-tree nested distance and its entropic regularization"""

__version__ = "1.0.0"
