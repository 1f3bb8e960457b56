"""Pointwise invariant-density approximation for intermittent interval maps
via inducing, a piecewise-linear Markov discretisation and pullback."""

from .mapmodel import MapSpec, canonical_lsv, inverse_T1, orbit_derivative

__all__ = ["MapSpec", "canonical_lsv", "inverse_T1", "orbit_derivative"]
__version__ = "0.1.0"
