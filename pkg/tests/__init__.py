"""Tests package for Proj-BNN."""
