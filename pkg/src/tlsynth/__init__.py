"""Time-bounded temporal logic control synthesis for multi-affine systems."""

__version__ = "0.1.0"
