"""Pulled fronts in higher-order scalar equations: speeds, kernels, stability."""

from . import errors, roots, model, weights, kernel, front, operator, semigroup, simulate

__version__ = "0.1.0"
