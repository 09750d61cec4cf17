"""Observability (stage traces) for reoptbench."""
