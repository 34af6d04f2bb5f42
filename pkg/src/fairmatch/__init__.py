"""Temporal-fairness exchange simulator."""
