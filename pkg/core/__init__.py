"""Numerical core: operators, entropies, free sets and the distance solver."""
