"""Continuous-time recurrent cells, NCP wiring and a wireless benchmark harness."""

__version__ = "0.1.0"
