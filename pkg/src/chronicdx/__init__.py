"""Chronic-disease diagnosis from daily behavioral data."""

__version__ = "0.1.0"
