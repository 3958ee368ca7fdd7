"""Grid sweeps, cross-sections and plot data files."""
