"""Utilities for reoptbench."""
