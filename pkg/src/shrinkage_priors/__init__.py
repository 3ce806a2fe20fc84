"""Heavy-tailed one-group shrinkage priors for sparse normal means."""
__version__ = "0.1.0"
