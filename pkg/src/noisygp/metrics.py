"""Regression error and noise-robustness measures."""

from __future__ import annotations

import numpy as np

__all__ = ["DegenerateTargetError", "nrmse", "rie", "eie", "robustness_curve"]


class DegenerateTargetError(ValueError):
    """Targets have zero dispersion, so normalised error is undefined."""


def nrmse(targets, predictions) -> float:
    """Normalised root mean squared error.

    ``sqrt(sum((y - f)**2) / sum((y - mean(y))**2))``: 0 for a perfect fit,
    1 for the constant mean predictor, unbounded above.

    Parameters
    ----------
    targets, predictions : array-like, shape (n,)

    Raises
    ------
    DegenerateTargetError
        If all targets are equal.
    """
    y = np.asarray(targets, dtype=np.float64)
    f = np.asarray(predictions, dtype=np.float64)
    if y.ndim != 1 or y.shape != f.shape:
        raise ValueError(f"targets and predictions must be equal-length vectors, got {y.shape} and {f.shape}")
    if y.size < 2:
        raise ValueError("nrmse needs at least two instances")
    spread = np.sum(np.square(y - y.mean()))
    if spread == 0.0:
        raise DegenerateTargetError("targets are constant")
    return float(np.sqrt(np.sum(np.square(y - f)) / spread))


class FitnessScorer:
    """NRMSE against fixed targets, with the denominator computed once.

    Non-finite predictions score ``inf``.
    """

    __slots__ = ("targets", "spread")

    def __init__(self, targets):
        self.targets = np.asarray(targets, dtype=np.float64)
        self.spread = float(np.sum(np.square(self.targets - self.targets.mean())))
        if self.spread == 0.0:
            raise DegenerateTargetError("targets are constant")

    def __call__(self, predictions) -> float:
        r = self.targets - predictions
        sse = float(np.dot(r, r))
        if not np.isfinite(sse):
            return np.inf
        return float(np.sqrt(sse / self.spread))


def _check(e_x, e_0):
    if not (np.all(np.isfinite(e_x)) and np.all(np.isfinite(e_0))):
        raise ValueError("errors must be finite")
    if np.any(np.asarray(e_x) < 0) or np.any(np.asarray(e_0) < 0):
        raise ValueError("errors must be non-negative")


def rie(e_x, e_0):
    """Relative increase in error, ``(e_x - e_0) / (1 + e_0)``.

    Negative when the noisy-data model does better than the clean one.
    """
    _check(e_x, e_0)
    return (e_x - e_0) / (1.0 + e_0)


def eie(e_x, e_0):
    """Equalised increase in error, ``e_x / (1 + e_0)``."""
    _check(e_x, e_0)
    return e_x / (1.0 + e_0)


def robustness_curve(errors: dict) -> dict:
    """RIE and EIE for every non-zero noise level in ``{level: error}``.

    Returns ``{level: (rie, eie)}``; the zero-noise entry is the baseline and
    must be present.
    """
    if 0.0 not in errors:
        raise KeyError("a 0% noise baseline is required")
    e_0 = errors[0.0]
    return {lvl: (rie(e, e_0), eie(e, e_0)) for lvl, e in sorted(errors.items()) if lvl > 0}
