"""Noise-tailored Clifford-deformed surface codes with matching decoders."""

__version__ = "0.1.0"
