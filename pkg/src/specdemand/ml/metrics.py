"""Regression metrics."""
import math

import numpy as np

from ..errors import DegenerateVariance, InvalidInput


def _pair(y_true, y_pred):
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise InvalidInput(f"shape mismatch {y_true.shape} vs {y_pred.shape}")
    if y_true.size < 2:
        raise InvalidInput("metrics need at least 2 samples")
    return y_true, y_pred


def r2(y_true, y_pred) -> float:
    """Coefficient of determination ``1 - SSE/SST``."""
    y_true, y_pred = _pair(y_true, y_pred)
    dev = y_true - y_true.mean()
    sst = float(dev @ dev)
    if not sst > 0:
        raise DegenerateVariance("r2 undefined: y_true has zero variance")
    res = y_true - y_pred
    return 1.0 - float(res @ res) / sst


def rmse(y_true, y_pred) -> float:
    y_true, y_pred = _pair(y_true, y_pred)
    res = y_true - y_pred
    return math.sqrt(float(res @ res) / res.size)
