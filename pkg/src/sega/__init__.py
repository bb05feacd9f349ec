"""Sketched gradient methods for composite convex optimization.

The package learns the gradient from random linear sketches
``S^T grad f(x)`` and uses the learned estimate in a proximal step.
"""
from sega._jit import NUMBA_ENABLED
from sega.core import Metric, SmoothnessData, check_spd, pseudo_inverse, weighted_norm_sq
from sega.prox import Regularizer, prox
from sega.sketch import SketchDistribution, SketchSample, sample

__version__ = "0.1.0"

__all__ = [
    "NUMBA_ENABLED",
    "Metric",
    "SmoothnessData",
    "check_spd",
    "pseudo_inverse",
    "weighted_norm_sq",
    "Regularizer",
    "prox",
    "SketchDistribution",
    "SketchSample",
    "sample",
]
