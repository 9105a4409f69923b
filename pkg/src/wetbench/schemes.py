"""Per-realization RF and harvested energy under the AA-SS, AA-IS and SA schemes."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSample, PhaseShift
from .errors import OutOfRange
from .harvester import EhCurve, LinearEh, harvest

__all__ = [
    "Scheme",
    "SchemeConfig",
    "JensenOrder",
    "rf_aa_ss",
    "rf_aa_is",
    "rf_sa_subblocks",
    "harvested",
    "jensen_order",
]


class Scheme(enum.Enum):
    AA_SS = "aa-ss"
    AA_IS = "aa-is"
    SA = "sa"


@dataclass(frozen=True)
class SchemeConfig:
    """Powering scheme, average single-antenna RF power beta (mW) and preventive shift."""

    scheme: Scheme
    beta: float
    shift: PhaseShift = field(default_factory=lambda: PhaseShift.zero(1))

    def __post_init__(self) -> None:
        if self.beta <= 0:
            raise OutOfRange(f"beta={self.beta} must be positive")


class JensenOrder(enum.Enum):
    SA_DOMINATES = "sa"
    AA_IS_DOMINATES = "aa-is"
    INDETERMINATE = "indeterminate"


def rf_aa_ss(sample: ChannelSample, beta: float):
    """Incident RF power when all antennas send the same signal: (beta/M)|1^T h|^2."""
    hx, hy = sample.hx, sample.hy
    m = hx.shape[-1]
    return (beta / m) * (hx.sum(axis=-1) ** 2 + hy.sum(axis=-1) ** 2)


def rf_aa_is(sample: ChannelSample, beta: float):
    """Incident RF power when antennas send independent signals: (beta/M)||h||^2."""
    m = sample.hx.shape[-1]
    return (beta / m) * sample.gains().sum(axis=-1)


def rf_sa_subblocks(sample: ChannelSample, beta: float) -> np.ndarray:
    """Incident RF power in each of the M equal-time switching sub-blocks."""
    return beta * sample.gains()


def harvested(config: SchemeConfig, curve: EhCurve | LinearEh, sample: ChannelSample):
    """Harvested power for one realization under the configured scheme.

    AA-SS / AA-IS map the total RF power through the harvester once; SA
    harvests each sub-block separately and averages over the block.
    """
    if config.scheme is Scheme.AA_SS:
        return harvest(curve, rf_aa_ss(sample, config.beta))
    if config.scheme is Scheme.AA_IS:
        return harvest(curve, rf_aa_is(sample, config.beta))
    sub = harvest(curve, rf_sa_subblocks(sample, config.beta))
    return np.asarray(sub).mean(axis=-1)


def jensen_order(sample: ChannelSample, beta: float, curve: EhCurve) -> JensenOrder:
    """Which of SA / AA-IS harvests more for this realization, by convexity of the curve.

    SA dominates when every per-antenna RF power is at or below the
    inflection point b (convex region), AA-IS dominates when every one is at
    or above it. At the exact boundary both harvested values coincide; the
    AA-IS label is returned deterministically.
    """
    powers = beta * sample.gains()
    if powers.min() >= curve.b:
        return JensenOrder.AA_IS_DOMINATES
    if powers.max() <= curve.b:
        return JensenOrder.SA_DOMINATES
    return JensenOrder.INDETERMINATE
