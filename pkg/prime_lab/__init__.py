"""Desk-scale laboratory for prime statistics and toy algorithmic probability."""

__version__ = "0.1.0"
