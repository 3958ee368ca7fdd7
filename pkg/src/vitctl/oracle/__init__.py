"""Monte Carlo verification on linear least-squares models."""
