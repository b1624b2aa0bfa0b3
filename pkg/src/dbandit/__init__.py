"""Distributed online projected gradient descent with bandit feedback."""

__version__ = "0.1.0"
