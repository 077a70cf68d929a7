"""Vision-based hydrometry: water level, surface velocity, imputation, rating curves."""

__version__ = "0.1.0"
