"""DVFS slack reclamation simulator for task graphs on multiprocessors."""

__version__ = "1.0.0"
