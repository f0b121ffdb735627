"""Decreasing step schedules and their partial sums.

The schedule gamma_k = gamma1 * k**(-theta) drives both the simulation
engine and every closed-form bound; partial sums of powers of the steps
(sum of gamma_k**l for k = 1..n) show up as normalizers and error terms.
Sums are accumulated with compensated arithmetic because n can reach 1e6
with slowly decaying terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "StepSchedule",
    "StepSums",
    "Holder",
    "Lipschitz",
    "RegularityMode",
    "ThetaVerdict",
    "kahan_add",
    "partial_sums",
    "extend_sums",
    "validate_theta",
]

#: Exponents l for which partial sums are tracked by default.
DEFAULT_EXPONENTS = (1.0, 1.5, 2.0)


def kahan_add(total, comp, value):
    """One compensated-summation update; returns (new_total, new_comp).

    Works elementwise for numpy arrays as well as plain floats, so the
    simulation engine can reuse it for per-replicate accumulators.
    """
    y = value - comp
    t = total + y
    comp = (t - total) - y
    return t, comp


@dataclass(frozen=True)
class StepSchedule:
    """Power-law step sequence gamma_k = gamma1 * k**(-theta)."""

    gamma1: float = 1.0
    theta: float = 1.0 / 3.0 + 1e-3

    def __post_init__(self) -> None:
        if not self.gamma1 > 0.0:
            raise ValueError(f"gamma1 must be positive, got {self.gamma1}")
        if not 0.0 < self.theta <= 1.0:
            raise ValueError(f"theta must lie in (0, 1], got {self.theta}")

    def step(self, k: int) -> float:
        """Step size gamma_k for k >= 1."""
        if k < 1:
            raise ValueError(f"step index must be >= 1, got {k}")
        return self.gamma1 * float(k) ** (-self.theta)


@dataclass(frozen=True)
class StepSums:
    """Partial sums Gamma_n^(l) = sum_{k<=n} gamma_k**l for tracked l."""

    n: int
    sums: dict[float, float]
    # Kahan compensations, carried so the sums can be extended in place.
    comps: dict[float, float] = field(default_factory=dict, compare=False)

    def __getitem__(self, exponent: float) -> float:
        return self.sums[float(exponent)]


def partial_sums(
    schedule: StepSchedule,
    n: int,
    exponents: tuple[float, ...] = DEFAULT_EXPONENTS,
) -> StepSums:
    """Batch-compute Gamma_n^(l) for each requested l > 0.

    Uses exact compensated summation (math.fsum) over the full range, so
    the result is correctly rounded regardless of n.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    k = np.arange(1, n + 1, dtype=np.float64)
    sums: dict[float, float] = {}
    for ell in exponents:
        ell = float(ell)
        if not ell > 0.0:
            raise ValueError(f"exponents must be positive, got {ell}")
        terms = (schedule.gamma1**ell) * k ** (-schedule.theta * ell)
        sums[ell] = math.fsum(terms)
    return StepSums(n=n, sums=sums, comps={ell: 0.0 for ell in sums})


def extend_sums(schedule: StepSchedule, sums: StepSums, n: int) -> StepSums:
    """Extend partial sums from sums.n to n with compensated updates."""
    if n < sums.n:
        raise ValueError(f"cannot extend sums at n={sums.n} down to n={n}")
    totals = dict(sums.sums)
    comps = {ell: sums.comps.get(ell, 0.0) for ell in totals}
    for k in range(sums.n + 1, n + 1):
        gam = schedule.step(k)
        for ell in totals:
            totals[ell], comps[ell] = kahan_add(totals[ell], comps[ell], gam**ell)
    return StepSums(n=n, sums=totals, comps=comps)


@dataclass(frozen=True)
class Holder:
    """Source regularity: Holder-continuous third derivatives of exponent beta."""

    beta: float

    def __post_init__(self) -> None:
        if not 0.0 < self.beta <= 1.0:
            raise ValueError(f"beta must lie in (0, 1], got {self.beta}")

    def theta_lower_bound(self) -> float:
        return 1.0 / (2.0 + self.beta)


@dataclass(frozen=True)
class Lipschitz:
    """Source regularity: merely Lipschitz source, stricter step constraint."""

    def theta_lower_bound(self) -> float:
        return 0.5


RegularityMode = Holder | Lipschitz


@dataclass(frozen=True)
class ThetaVerdict:
    """Outcome of the admissibility check for the step exponent."""

    accepted: bool
    theta: float
    lower_bound: float
    reason: str

    def __bool__(self) -> bool:
        return self.accepted


def validate_theta(schedule: StepSchedule, mode: RegularityMode) -> ThetaVerdict:
    """Check theta against the admissible open-interval lower bound.

    Accepts iff theta in (lb, 1] with lb = 1/(2+beta) in Holder mode and
    lb = 1/2 in Lipschitz mode.  Rejection is a value, not an exception.
    """
    lb = mode.theta_lower_bound()
    theta = schedule.theta
    if theta > lb:
        return ThetaVerdict(True, theta, lb, f"theta={theta:.6g} in ({lb:.6g}, 1]")
    return ThetaVerdict(
        False,
        theta,
        lb,
        f"theta={theta:.6g} violates the open lower bound {lb:.6g}"
        " (admissible range is ({:.6g}, 1])".format(lb),
    )
