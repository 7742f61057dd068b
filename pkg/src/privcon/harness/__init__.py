"""Experiment presets, drivers and the command line interface."""
