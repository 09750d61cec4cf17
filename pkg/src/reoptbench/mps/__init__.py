"""MPS reading and writing."""
