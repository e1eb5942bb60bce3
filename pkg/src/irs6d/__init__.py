"""Joint location and orientation estimation with a target-mounted IRS."""

__version__ = "0.1.0"
