"""Twisted transfer operators of expanding interval maps and oscillatory cancellation estimates."""

__version__ = "0.1.0"
