"""Bounding the output deviation between a ReLU network and its fully quantized counterpart."""

__version__ = "0.1.0"
