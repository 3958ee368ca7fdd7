"""Determination ratio and analytic error laws."""
