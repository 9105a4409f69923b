"""Non-linear energy-harvester transfer function and dBm/mW plumbing.

All powers are carried in mW internally; dBm appears only at I/O
boundaries because the transfer-function fit parameters assume a
linear-scale input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NegativeInput, NonPositive, OutOfRange

__all__ = [
    "EhCurve",
    "LinearEh",
    "TABLE2_CURVE",
    "harvest",
    "harvest_inverse",
    "inflection",
    "dbm_to_mw",
    "mw_to_dbm",
]


@dataclass(frozen=True)
class EhCurve:
    """Logistic-style non-linear harvester model.

    g_max -- harvested power at saturation (mW)
    a, b  -- unitless fit parameters, both > 0 (b is the convex/concave
             inflection point of the curve in mW of incident power)
    xi0   -- outage threshold on incident RF power (mW)
    """

    g_max: float
    a: float
    b: float
    xi0: float

    def __post_init__(self) -> None:
        if self.g_max <= 0 or self.a <= 0 or self.b <= 0:
            raise OutOfRange("g_max, a and b must all be positive")
        if self.xi0 < 0:
            raise OutOfRange("xi0 must be non-negative")


@dataclass(frozen=True)
class LinearEh:
    """Idealized linear harvester, g(x) = eta * x."""

    eta: float

    def __post_init__(self) -> None:
        if not 0.0 < self.eta <= 1.0:
            raise OutOfRange(f"eta={self.eta} not in (0, 1]")


# 2.45 GHz rectifier fit with a -2 dBm outage threshold; the only curve the
# source measurements support.
TABLE2_CURVE = EhCurve(g_max=2.0, a=0.56, b=3.5, xi0=10 ** (-2 / 10))


def harvest(curve: EhCurve | LinearEh, x):
    """Harvested power (mW) for incident RF power x (mW, scalar or array)."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0):
        raise NegativeInput("incident RF power must be non-negative")
    if isinstance(curve, LinearEh):
        out = curve.eta * arr
        return out if arr.ndim else float(out)
    eab = math.exp(curve.a * curve.b)
    out = curve.g_max * ((1 + eab) / (1 + np.exp(-curve.a * (arr - curve.b))) - 1) / eab
    out = np.clip(out, 0.0, curve.g_max)
    return out if arr.ndim else float(out)


def harvest_inverse(curve: EhCurve, y: float) -> float:
    """Incident RF power whose harvested power is y; inverse of the monotone curve.

    Valid for 0 <= y < g_max * (1 - e^{-ab}) / ... i.e. strictly below the
    saturation limit actually reachable at finite input.
    """
    if y < 0:
        raise NegativeInput("harvested power must be non-negative")
    if y == 0:
        return 0.0
    eab = math.exp(curve.a * curve.b)
    q = (1 + eab) / (y / (curve.g_max / eab) + 1) - 1
    if q <= 0:
        raise OutOfRange("harvested power at or above the finite-input range of the curve")
    return curve.b - math.log(q) / curve.a


def inflection(curve: EhCurve) -> float:
    """Incident power at which the curve switches from convex to concave (= b)."""
    return curve.b


def dbm_to_mw(x):
    """Convert dBm to mW."""
    out = np.power(10.0, np.asarray(x, dtype=float) / 10.0)
    return out if np.ndim(x) else float(out)


def mw_to_dbm(x):
    """Convert mW to dBm; raises NonPositive for x <= 0."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 0):
        raise NonPositive("mw_to_dbm requires strictly positive power")
    out = 10.0 * np.log10(arr)
    return out if arr.ndim else float(out)
