"""Continuous-mode Fock-state master-equation hierarchies for open quantum systems."""

__version__ = "0.1.0"
