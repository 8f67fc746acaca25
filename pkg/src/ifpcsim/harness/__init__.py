"""Experiment runner, calibration and the command-line interface."""
