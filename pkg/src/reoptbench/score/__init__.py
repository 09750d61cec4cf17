"""Scoring, ranking and reporting."""
