"""Weighted Fair Queueing and Just Queueing on a simulated output link."""

__version__ = "0.1.0"
