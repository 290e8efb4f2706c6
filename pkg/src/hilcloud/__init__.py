"""Hierarchical imitation learning toolkit for ceiling-tile installation skills."""

__version__ = "0.1.0"
