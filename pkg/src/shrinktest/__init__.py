"""Multiple testing of sparse normal means with global-local shrinkage priors."""

__version__ = "0.1.0"
