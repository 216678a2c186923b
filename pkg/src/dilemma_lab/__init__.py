"""Multi-agent social-dilemma experiment harness."""

__version__ = "0.1.0"
