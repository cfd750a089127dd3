"""Experiment front end: dataset generators, persistence, reproductions, benchmark, CLI."""
