"""Classify Go ``unsafe`` usages by what they do and why, with calibrated set-valued output."""

__version__ = "0.1.0"
