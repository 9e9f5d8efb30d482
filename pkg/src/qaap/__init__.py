"""Numerical toolkit for quasi-asymptotically almost periodic functions."""
