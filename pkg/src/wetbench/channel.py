"""Correlated Rician channel model for a half-wavelength ULA power beacon.

Provides correlation-matrix construction, line-of-sight phase geometry,
preventive phase shifting and sampling of the equivalent real/imaginary
channel component vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FactorizationFailure, NotPositiveSemidefinite, OutOfRange

__all__ = [
    "Exponential",
    "Uniform",
    "Custom",
    "CorrelationModel",
    "ArrayConfig",
    "PhaseShift",
    "ChannelSample",
    "los_phases",
    "build_correlation",
    "r_sum",
    "r_sum_exponential",
    "r_sum_uniform",
    "mean_vectors",
    "correlation_factor",
    "sample_channel",
    "apply_phase_rotation",
]

# Eigenvalues of a PSD correlation matrix may dip slightly negative from
# rounding; anything below -PSD_TOL is treated as genuinely indefinite.
PSD_TOL = 1e-10


@dataclass(frozen=True)
class Exponential:
    """Exponential spatial correlation, R[i, j] = tau^|i-j|."""

    tau: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.tau < 1.0:
            raise OutOfRange(f"exponential coefficient tau={self.tau} not in [0, 1)")


@dataclass(frozen=True)
class Uniform:
    """Uniform spatial correlation, R[i, j] = rho for all i != j.

    rho >= -1/(M-1) is required for positive semidefiniteness and is
    checked against M at matrix-build time.
    """

    rho: float

    def __post_init__(self) -> None:
        if not -1.0 <= self.rho <= 1.0:
            raise OutOfRange(f"uniform coefficient rho={self.rho} not in [-1, 1]")


@dataclass(frozen=True)
class Custom:
    """User-supplied correlation matrix, validated on build."""

    R: np.ndarray


CorrelationModel = Exponential | Uniform | Custom


@dataclass(frozen=True)
class PhaseShift:
    """Preventive per-antenna phases in radians; the first antenna is the reference (psi[0] = 0)."""

    psi: np.ndarray

    def __post_init__(self) -> None:
        psi = np.asarray(self.psi, dtype=float)
        object.__setattr__(self, "psi", psi)
        if psi.ndim != 1 or psi.size < 1:
            raise OutOfRange("psi must be a non-empty 1-D vector")
        if abs(psi[0]) > 0.0:
            raise OutOfRange("psi[0] must be 0 (first antenna is the phase reference)")

    @classmethod
    def zero(cls, m: int) -> "PhaseShift":
        return cls(np.zeros(m))

    @property
    def m(self) -> int:
        return self.psi.size


@dataclass(frozen=True)
class ArrayConfig:
    """Power-beacon antenna array and fading configuration.

    M       -- antenna count (>= 1)
    kappa   -- Rician factor (>= 0; 0 is Rayleigh, large values approach pure LOS)
    phi     -- device azimuth relative to array boresight, radians in [0, 2*pi]
    phi0    -- initial phase convention, radians (pi/4 splits the LOS component
               evenly between real and imaginary parts)
    correlation -- spatial correlation model across antennas
    """

    M: int
    kappa: float
    phi: float
    phi0: float = math.pi / 4
    correlation: CorrelationModel = field(default_factory=lambda: Exponential(0.0))

    def __post_init__(self) -> None:
        if self.M < 1:
            raise OutOfRange(f"M={self.M} must be >= 1")
        if self.kappa < 0:
            raise OutOfRange(f"kappa={self.kappa} must be >= 0")
        if not 0.0 <= self.phi <= 2 * math.pi:
            raise OutOfRange(f"phi={self.phi} not in [0, 2*pi]")


@dataclass(frozen=True)
class ChannelSample:
    """Real and imaginary component vectors of one equivalent channel realization."""

    hx: np.ndarray
    hy: np.ndarray

    @property
    def m(self) -> int:
        return self.hx.size

    def gains(self) -> np.ndarray:
        """Per-antenna power gains |h_j|^2."""
        return self.hx**2 + self.hy**2


def los_phases(config: ArrayConfig) -> np.ndarray:
    """Mean phase of each array element relative to the first, Phi_t = -t*pi*sin(phi)."""
    t = np.arange(config.M, dtype=float)
    return -t * math.pi * math.sin(config.phi)


def build_correlation(model: CorrelationModel, M: int) -> np.ndarray:
    """Build and validate the M x M spatial correlation matrix."""
    if M < 1:
        raise OutOfRange(f"M={M} must be >= 1")
    if isinstance(model, Exponential):
        idx = np.arange(M)
        return model.tau ** np.abs(idx[:, None] - idx[None, :])
    if isinstance(model, Uniform):
        lo = -1.0 / (M - 1) if M > 1 else -1.0
        if model.rho < lo - 1e-15:
            raise OutOfRange(f"uniform rho={model.rho} below PSD bound {lo} for M={M}")
        R = np.full((M, M), model.rho, dtype=float)
        np.fill_diagonal(R, 1.0)
        return R
    if isinstance(model, Custom):
        R = np.asarray(model.R, dtype=float)
        if R.shape != (M, M):
            raise NotPositiveSemidefinite(f"custom R has shape {R.shape}, expected ({M}, {M})")
        if not np.allclose(R, R.T, atol=1e-12):
            raise NotPositiveSemidefinite("custom R is not symmetric")
        if not np.allclose(np.diag(R), 1.0, atol=1e-12):
            raise NotPositiveSemidefinite("custom R does not have a unit diagonal")
        if np.linalg.eigvalsh(R).min() < -PSD_TOL:
            raise NotPositiveSemidefinite("custom R has an eigenvalue below tolerance")
        return R
    raise TypeError(f"unknown correlation model {model!r}")


def r_sum(R: np.ndarray) -> float:
    """Sum of all entries of the correlation matrix (1^T R 1)."""
    return float(np.sum(R))


def r_sum_exponential(tau: float, M: int) -> float:
    """Closed form of r_sum for exponential correlation (geometric series)."""
    if not 0.0 <= tau < 1.0:
        raise OutOfRange(f"tau={tau} not in [0, 1)")
    if tau == 0.0:
        return float(M)
    return (M * (1 - tau**2) - 2 * tau * (1 - tau**M)) / (1 - tau) ** 2


def r_sum_uniform(rho: float, M: int) -> float:
    """Closed form of r_sum for uniform correlation, M*(1 + (M-1)*rho)."""
    return M * (1.0 + (M - 1) * rho)


def mean_vectors(config: ArrayConfig, shift: PhaseShift) -> tuple[np.ndarray, np.ndarray]:
    """LOS mean direction vectors (omega_x, omega_y) of the shifted channel.

    With the default phi0 = pi/4 these reduce to
    omega_x[t] = cos(Phi_t + psi_t) - sin(Phi_t + psi_t) and
    omega_y[t] = cos(Phi_t + psi_t) + sin(Phi_t + psi_t).
    """
    if shift.m != config.M:
        raise OutOfRange(f"shift has {shift.m} entries, expected {config.M}")
    angles = config.phi0 + los_phases(config) + shift.psi
    root2 = math.sqrt(2.0)
    return root2 * np.cos(angles), root2 * np.sin(angles)


def correlation_factor(R: np.ndarray) -> np.ndarray:
    """Symmetric square-root factor of R via spectral decomposition.

    Eigenvalues in [-PSD_TOL, 0) are clamped to 0 so singular-but-PSD
    matrices (e.g. uniform rho = 1) remain usable.
    """
    w, Q = np.linalg.eigh(np.asarray(R, dtype=float))
    if w.min() < -PSD_TOL:
        raise FactorizationFailure(
            f"correlation matrix indefinite: min eigenvalue {w.min():.3e}"
        )
    w = np.clip(w, 0.0, None)
    return Q * np.sqrt(w)


def sample_channel(
    config: ArrayConfig,
    shift: PhaseShift,
    rng: np.random.Generator,
    n: int | None = None,
    factor: np.ndarray | None = None,
) -> ChannelSample:
    """Draw correlated Rician channel realizations with preventive phase shifting.

    hx and hy are independent draws from
    N(sqrt(kappa / (2*(kappa+1))) * omega_{x,y}, R / (2*(kappa+1))).
    With n=None a single ChannelSample of shape (M,) is returned, otherwise
    the component arrays have shape (n, M).
    """
    M = config.M
    if factor is None:
        factor = correlation_factor(build_correlation(config.correlation, M))
    ox, oy = mean_vectors(config, shift)
    scale = 1.0 / math.sqrt(2.0 * (config.kappa + 1.0))
    mean_scale = math.sqrt(config.kappa / (2.0 * (config.kappa + 1.0)))
    rows = 1 if n is None else n
    zx = rng.standard_normal((rows, M))
    zy = rng.standard_normal((rows, M))
    hx = scale * (zx @ factor.T) + mean_scale * ox
    hy = scale * (zy @ factor.T) + mean_scale * oy
    if n is None:
        return ChannelSample(hx[0], hy[0])
    return ChannelSample(hx, hy)


def apply_phase_rotation(hx: np.ndarray, hy: np.ndarray, psi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rotate channel entries by per-antenna phases: h_j -> e^{i psi_j} h_j.

    Equivalent to sampling with the shift folded into the LOS means; the
    scattering covariance is invariant because the rotation is diagonal.
    """
    c, s = np.cos(psi), np.sin(psi)
    return hx * c - hy * s, hx * s + hy * c
