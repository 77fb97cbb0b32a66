"""Multilingual cultural QA benchmark pipeline: synthesis, annotation, and judging."""

__version__ = "0.1.0"
