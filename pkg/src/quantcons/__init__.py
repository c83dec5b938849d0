"""Quantized average consensus on digraphs via event-triggered mass splitting."""

__version__ = "0.1.0"
