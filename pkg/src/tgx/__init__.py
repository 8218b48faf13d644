"""Koopman-regularized temporal-graph classification with post hoc
DMD and SINDy explanations scored against simulation ground truth."""

__version__ = "0.1.0"
