"""Three-tier numerical laboratory for nonlinear WKB wave-mean-flow models."""

__version__ = "0.1.0"
