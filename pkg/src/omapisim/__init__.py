"""Secure element middleware over a simulated UICC and baseband."""

__version__ = "0.1.0"
