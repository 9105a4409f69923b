"""Preventive phase-shift selection.

Closed-form rules for the energy-maximizing and variance-minimizing shifts,
the AA-IS branch rule driven by the correlation mass r_sum, and a
derivative-free multi-start coordinate-descent search used to verify them.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .channel import PhaseShift
from .errors import BudgetExceeded, OutOfRange
from .analytic import _favg_coeffs, _ftilde_coeffs, eval_phase_poly
from .rng import stream

__all__ = [
    "Objective",
    "SearchResult",
    "max_energy_shift",
    "min_var_shift",
    "aa_is_shift",
    "search_phase",
]


def max_energy_shift(M: int) -> PhaseShift:
    """Average-energy-maximizing shift: consecutive antennas pi phase-shifted."""
    if M < 1:
        raise OutOfRange("M must be >= 1")
    return PhaseShift((np.arange(M) % 2) * math.pi)


def min_var_shift(M: int) -> PhaseShift:
    """Variance-minimizing shift: no preventive shifting (psi = 0)."""
    if M < 1:
        raise OutOfRange("M must be >= 1")
    return PhaseShift.zero(M)


def aa_is_shift(M: int, R_sum: float) -> PhaseShift:
    """Variance-optimal shift under AA-IS, switching on the sign of R_sum - M.

    At R_sum = M the shift has no effect on the variance; the zero shift is
    returned by convention.
    """
    if not 0.0 <= R_sum <= M**2 + 1e-9:
        raise OutOfRange(f"R_sum={R_sum} outside [0, M^2]")
    if R_sum < M:
        return max_energy_shift(M)
    return min_var_shift(M)


class Objective(enum.Enum):
    MAX_F_AVG = "max-f-avg"
    MIN_F_AVG = "min-f-avg"
    MAX_F_TILDE_AVG = "max-f-tilde-avg"


@dataclass(frozen=True)
class SearchResult:
    shift: PhaseShift
    value: float
    evaluations: int


def _coeffs(objective: Objective, M: int):
    if objective is Objective.MAX_F_TILDE_AVG:
        return _ftilde_coeffs(M)
    return _favg_coeffs(M)


def search_phase(
    objective: Objective,
    M: int,
    restarts: int = 16,
    grid: int = 720,
    seed: int = 0,
    max_sweeps: int = 50,
) -> SearchResult:
    """Cyclic coordinate descent over psi_t on a uniform [0, 2*pi) grid.

    Multi-start with deterministic seeding; ties between restarts break on the
    lowest restart index. The objective value is monotone across sweeps by
    construction. Limited to M <= 32, where grid descent stays tractable.
    """
    if M > 32:
        raise OutOfRange("search_phase supports M <= 32")
    if M < 1 or restarts < 1 or grid < 2:
        raise OutOfRange("invalid search parameters")
    sign = -1.0 if objective is Objective.MIN_F_AVG else 1.0
    coeffs = _coeffs(objective, M)
    angles = np.arange(grid) * (2.0 * math.pi / grid)
    budget = restarts * (max_sweeps * (M - 1) * grid + 1)
    evals = 0

    best_psi: np.ndarray | None = None
    best_val = -math.inf
    for r in range(restarts):
        rng = stream(seed, r)
        psi = np.zeros(M)
        if r > 0 and M > 1:
            psi[1:] = rng.uniform(0.0, 2.0 * math.pi, M - 1)
        val = sign * float(eval_phase_poly(coeffs, psi)[0])
        evals += 1
        for _ in range(max_sweeps):
            improved = False
            for t in range(1, M):
                batch = np.broadcast_to(psi, (grid, M)).copy()
                batch[:, t] = angles
                vals = sign * eval_phase_poly(coeffs, batch)
                evals += grid
                if evals > budget:
                    raise BudgetExceeded("coordinate-descent budget exhausted")
                k = int(np.argmax(vals))
                if vals[k] > val + 1e-12:
                    psi[t] = angles[k]
                    val, improved = float(vals[k]), True
            if not improved:
                break
        if val > best_val:
            best_val, best_psi = val, psi.copy()
    assert best_psi is not None
    return SearchResult(PhaseShift(best_psi), sign * best_val, evals)
