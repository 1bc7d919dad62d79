"""Symmetry analysis and equivalence machinery for variable-coefficient Burgers equations."""

__version__ = "0.1.0"
