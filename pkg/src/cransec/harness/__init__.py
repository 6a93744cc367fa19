"""Experiment runner, acceptance suite and command line."""
