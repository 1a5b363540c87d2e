"""Black-box feature-importance attacks on tabular classifiers."""

__version__ = "0.1.0"
