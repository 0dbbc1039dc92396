"""Decoding strategies and evaluation workbench for dialogue response generation."""

__version__ = "0.1.0"
