"""Illumination-robust camera localization against a synthetic feature database."""

__version__ = "0.1.0"
