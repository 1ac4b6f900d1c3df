"""Interacting-queues laboratory for static ultradense wireless networks."""

__version__ = "0.1.0"
