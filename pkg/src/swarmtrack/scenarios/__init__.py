"""Bundled scenario files (loaded via importlib.resources)."""
