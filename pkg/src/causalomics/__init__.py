"""Causal structure discovery on mixed-type multi-omics tables."""

__version__ = "0.1.0"
