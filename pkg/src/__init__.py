"""pivkit: probability that a causal inference is robust for internal validity."""

__version__ = "0.1.0"
