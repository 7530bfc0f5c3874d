"""Generalization intervals of piecewise-linear ReLU classifiers."""

__version__ = "0.1.0"
