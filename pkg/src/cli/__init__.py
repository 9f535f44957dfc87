"""
CLI module for Proj-BNN.
"""

from .commands import app, main

__all__ = ["app", "main"]
