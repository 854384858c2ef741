"""Schmidt-number witnesses tailored to restricted measurement sets."""

__version__ = "0.1.0"
