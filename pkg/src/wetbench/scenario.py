"""Deployment studies: device placement, path loss, array rotation and
antenna-group powering plans evaluated under max-min fairness.

Devices are placed on a disk around the beacon, each seeing a path-loss
driven average power and an azimuth-dependent LOS geometry.  A plan rotates
the array and assigns disjoint consecutive antenna groups to powering
schemes; per-device energies are estimated by Monte Carlo with streams keyed
by the device's coordinates, so results are invariant to device ordering and
plans evaluated on the same deployment share channel realizations.
"""

from __future__ import annotations

import hashlib
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import ArrayConfig, PhaseShift, apply_phase_rotation, build_correlation, correlation_factor
from .errors import EmptyCandidateSet, NonPositiveDistance, OutOfRange
from .harvester import EhCurve, LinearEh, dbm_to_mw, harvest
from .montecarlo import FixedPhi, _draw_components
from .optimize import max_energy_shift, min_var_shift
from .rng import stream
from .schemes import Scheme

__all__ = [
    "PathLoss",
    "UniformDisk",
    "Cluster",
    "Clusters",
    "Deployment",
    "Group",
    "BeaconPlan",
    "PlanResult",
    "SweepResult",
    "beta_at",
    "device_phi",
    "realize_devices",
    "evaluate_plan",
    "sweep_plans",
    "single_scheme_plan",
    "scenario_a",
    "scenario_b",
    "scenario_c",
    "scenario_b_plan",
    "scenario_c_plan",
]


@dataclass(frozen=True)
class PathLoss:
    """Log-distance path loss: beta(dBm) = intercept - exponent * log10(d in m)."""

    intercept_dbm: float = 30.0
    exponent: float = 27.0


@dataclass(frozen=True)
class UniformDisk:
    """Devices distributed uniformly over a disk around the beacon."""

    radius: float
    count: int

    def __post_init__(self) -> None:
        if self.radius <= 0 or self.count < 1:
            raise OutOfRange("radius must be positive and count >= 1")


@dataclass(frozen=True)
class Cluster:
    """One device cluster: azimuth uniform within a spread around the center,
    radius uniform within the radial range."""

    center_azimuth: float
    angular_spread: float
    radial_range: tuple[float, float]
    count: int

    def __post_init__(self) -> None:
        lo, hi = self.radial_range
        if not 0 < lo <= hi:
            raise OutOfRange("radial range must satisfy 0 < lo <= hi")
        if self.count < 1 or self.angular_spread < 0:
            raise OutOfRange("count >= 1 and angular_spread >= 0 required")


@dataclass(frozen=True)
class Clusters:
    clusters: tuple[Cluster, ...]


@dataclass(frozen=True)
class Deployment:
    """Device layout (generator or explicit (distance, azimuth) list) plus path loss."""

    layout: UniformDisk | Clusters | tuple[tuple[float, float], ...]
    pathloss: PathLoss = field(default_factory=PathLoss)


@dataclass(frozen=True)
class Group:
    """Consecutive antenna indices driven by one signal."""

    antennas: tuple[int, ...]
    scheme: Scheme
    shift: PhaseShift

    def __post_init__(self) -> None:
        a = self.antennas
        if len(a) < 1 or list(a) != list(range(a[0], a[0] + len(a))):
            raise OutOfRange("antenna indices must be non-empty and consecutive")
        if self.shift.m != len(a):
            raise OutOfRange("group shift length must match the antenna count")


@dataclass(frozen=True)
class BeaconPlan:
    """Array rotation plus disjoint antenna groups covering a subset of the array.

    The beacon's total power is split equally across all active antennas; a
    group's share is proportional to its size.  The time-switched scheme is
    only meaningful as a whole-array single group and is rejected alongside
    simultaneous groups.
    """

    rotation: float
    groups: tuple[Group, ...]

    def __post_init__(self) -> None:
        if not self.groups:
            raise OutOfRange("a plan needs at least one group")
        used: set[int] = set()
        for g in self.groups:
            if used & set(g.antennas):
                raise OutOfRange("groups must use disjoint antennas")
            used |= set(g.antennas)
        if len(self.groups) > 1 and any(g.scheme is Scheme.SA for g in self.groups):
            raise OutOfRange("the switching scheme cannot share the block with other groups")

    @property
    def active(self) -> int:
        return sum(len(g.antennas) for g in self.groups)


def beta_at(pathloss: PathLoss, d: float) -> float:
    """Average single-antenna RF power (mW) at distance d meters."""
    if d <= 0:
        raise NonPositiveDistance(f"distance d={d} must be positive")
    return dbm_to_mw(pathloss.intercept_dbm - pathloss.exponent * math.log10(d))


def device_phi(azimuth: float, rotation: float) -> float:
    """Device azimuth in the rotated array frame, wrapped into [0, 2*pi)."""
    return (azimuth - rotation) % (2.0 * math.pi)


def realize_devices(deployment: Deployment, seed: int) -> np.ndarray:
    """Draw the (distance, azimuth) array of the deployment, shape (n, 2)."""
    layout = deployment.layout
    if isinstance(layout, tuple):
        out = np.asarray(layout, dtype=float)
        if out.ndim != 2 or out.shape[1] != 2 or np.any(out[:, 0] <= 0):
            raise OutOfRange("explicit devices must be (distance > 0, azimuth) pairs")
        return out
    rng = stream(seed, 0)
    if isinstance(layout, UniformDisk):
        d = layout.radius * np.sqrt(rng.uniform(0.0, 1.0, layout.count))
        az = rng.uniform(0.0, 2.0 * math.pi, layout.count)
        return np.column_stack([d, az])
    rows = []
    for c in layout.clusters:
        lo, hi = c.radial_range
        d = rng.uniform(lo, hi, c.count)
        az = rng.uniform(c.center_azimuth - c.angular_spread, c.center_azimuth + c.angular_spread, c.count)
        rows.append(np.column_stack([d, az % (2.0 * math.pi)]))
    return np.concatenate(rows)


@dataclass(frozen=True)
class PlanResult:
    devices: np.ndarray
    energies: np.ndarray
    min_energy: float


def _device_stream_id(d: float, azimuth: float) -> int:
    """Stable 64-bit stream id derived from the device's coordinates."""
    digest = hashlib.blake2b(struct.pack("<dd", d, azimuth), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def _device_energy(
    plan: BeaconPlan,
    array: ArrayConfig,
    curve: EhCurve | LinearEh,
    factor: np.ndarray,
    pathloss: PathLoss,
    d: float,
    azimuth: float,
    samples: int,
    seed: int,
) -> float:
    beta = beta_at(pathloss, d)
    phi_eff = device_phi(azimuth, plan.rotation)
    config = replace(array, phi=phi_eff)
    # keyed on (distance, effective azimuth): invariant to device relabeling
    # and to rotating the frame and all azimuths together
    rng = stream(seed, _device_stream_id(d, phi_eff))
    sample = _draw_components(config, PhaseShift.zero(array.M), FixedPhi(), factor, rng, samples)
    active = plan.active
    only = plan.groups[0]
    if len(plan.groups) == 1 and only.scheme is Scheme.SA:
        idx = list(only.antennas)
        sub = beta * (sample.hx[:, idx] ** 2 + sample.hy[:, idx] ** 2)
        return float(np.asarray(harvest(curve, sub)).mean())
    rf = np.zeros(samples)
    for g in plan.groups:
        idx = list(g.antennas)
        hx, hy = apply_phase_rotation(sample.hx[:, idx], sample.hy[:, idx], g.shift.psi)
        per_antenna = beta / active
        if g.scheme is Scheme.AA_SS:
            rf += per_antenna * ((hx.sum(axis=1)) ** 2 + (hy.sum(axis=1)) ** 2)
        else:
            rf += per_antenna * (hx**2 + hy**2).sum(axis=1)
    return float(np.asarray(harvest(curve, rf)).mean())


def evaluate_plan(
    deployment: Deployment,
    plan: BeaconPlan,
    array: ArrayConfig,
    curve: EhCurve | LinearEh,
    samples: int = 20000,
    seed: int = 0,
    threads: int = 1,
) -> PlanResult:
    """Per-device mean harvested energy (mW) under the plan, and the minimum.

    Channel streams are keyed by device coordinates in the rotated frame:
    the result is invariant to device relabeling, and plans sharing a
    rotation reuse the same fading realizations.
    """
    for g in plan.groups:
        if max(g.antennas) >= array.M:
            raise OutOfRange("plan uses antennas outside the array")
    devices = realize_devices(deployment, seed)
    factor = correlation_factor(build_correlation(array.correlation, array.M))

    def work(row):
        return _device_energy(
            plan, array, curve, factor, deployment.pathloss, row[0], row[1], samples, seed
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            energies = np.array(list(pool.map(work, devices)))
    else:
        energies = np.array([work(row) for row in devices])
    return PlanResult(devices, energies, float(energies.min()))


@dataclass(frozen=True)
class SweepResult:
    best: BeaconPlan
    best_min: float
    minima: np.ndarray


def sweep_plans(
    deployment: Deployment,
    plans: list[BeaconPlan],
    array: ArrayConfig,
    curve: EhCurve | LinearEh,
    samples: int = 20000,
    seed: int = 0,
    threads: int = 1,
) -> SweepResult:
    """Exhaustive max-min search over the candidate plans (first-wins ties)."""
    if not plans:
        raise EmptyCandidateSet("no candidate plans supplied")
    minima = np.array(
        [
            evaluate_plan(deployment, p, array, curve, samples, seed, threads).min_energy
            for p in plans
        ]
    )
    best = int(np.argmax(minima))
    return SweepResult(plans[best], float(minima[best]), minima)


def single_scheme_plan(M: int, scheme: Scheme, shift: PhaseShift | None = None) -> BeaconPlan:
    """Whole-array plan: every antenna in one group under one scheme."""
    if shift is None:
        shift = PhaseShift.zero(M)
    return BeaconPlan(0.0, (Group(tuple(range(M)), scheme, shift),))


def _deg(x: float) -> float:
    return math.radians(x)


def scenario_a(count: int = 80, radius: float = 10.0) -> Deployment:
    """Devices uniform over the disk (no clustering)."""
    return Deployment(UniformDisk(radius, count))


def scenario_b(count: int = 80) -> Deployment:
    """Two clusters on opposite sides of the beacon (endfire after a 20 deg
    counter-clockwise array rotation)."""
    half = count // 2
    return Deployment(
        Clusters(
            (
                Cluster(_deg(110.0), _deg(8.0), (4.0, 7.0), half),
                Cluster(_deg(290.0), _deg(8.0), (4.0, 7.0), count - half),
            )
        )
    )


def scenario_c(count: int = 80) -> Deployment:
    """The two clusters of the opposite-side layout plus a third shifted ~90 deg."""
    third = count // 3
    return Deployment(
        Clusters(
            (
                Cluster(_deg(350.0), _deg(8.0), (4.0, 7.0), third),
                Cluster(_deg(80.0), _deg(8.0), (4.0, 7.0), third),
                Cluster(_deg(170.0), _deg(8.0), (4.0, 7.0), count - 2 * third),
            )
        )
    )


def scenario_b_plan(M: int = 8) -> BeaconPlan:
    """Rotate 20 deg counter-clockwise; drive 2 consecutive antennas with the
    same signal under the energy-maximizing shift (wide endfire side-beams)."""
    return BeaconPlan(_deg(20.0), (Group((0, 1), Scheme.AA_SS, max_energy_shift(2)),))


def scenario_c_plan(M: int = 8) -> BeaconPlan:
    """Rotate 10 deg clockwise; two 4-antenna groups, one un-shifted (broadside
    beams at 0/180 deg) and one energy-maximizing (endfire beams at +-90 deg)."""
    half = M // 2
    return BeaconPlan(
        _deg(-10.0),
        (
            Group(tuple(range(half)), Scheme.AA_SS, min_var_shift(half)),
            Group(tuple(range(half, M)), Scheme.AA_SS, max_energy_shift(half)),
        ),
    )
