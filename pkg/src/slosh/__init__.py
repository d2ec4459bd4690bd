"""2D SPH fuel-sloshing simulator with LPV surrogate identification."""

__version__ = "0.1.0"
