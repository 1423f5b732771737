"""Equivalence proofs for arithmetic expressions via guided rewrite search."""

__version__ = "0.1.0"
