"""reoptbench: benchmark toolkit for MILP reoptimization series."""

__version__ = "0.1.0"
