"""Lightweight package metadata to avoid heavy imports."""

__version__ = "0.1.0"
__author__ = "Proj-BNN contributors"
__license__ = "MIT"

__all__ = ["__version__", "__author__", "__license__"]
