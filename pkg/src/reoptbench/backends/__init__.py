"""Solver backends for the reoptimizing baseline."""
