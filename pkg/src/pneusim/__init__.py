"""Switch-level simulation of vacuum-driven membrane-valve logic."""

__version__ = "0.1.0"
