"""Repair of trained image classifiers: a numpy engine, three repair strategies and a comparison harness."""

__version__ = "0.1.0"
