"""Sigmoid calibration of the classifier scores.

The submodules are imported directly (e.g. ``regioncal.calibration.joint``),
as the region labeling code depends on :mod:`regioncal.calibration.sigmoid`.
"""
