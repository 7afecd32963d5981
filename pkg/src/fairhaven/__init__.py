"""fairhaven: a desk-scale FAIR scientific data management platform."""

__version__ = "0.1.0"
