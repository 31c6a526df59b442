"""Workbench for building and scoring cross-document coreference corpora."""

__version__ = "0.1.0"
