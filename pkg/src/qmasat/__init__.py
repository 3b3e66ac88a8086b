"""Desk-scale simulator and lemma checker for the multi-prover QMA protocol for 3SAT."""

__version__ = "0.1.0"
