"""MILP data model, feasibility checking and masked variations."""
