"""Normal-distribution primitives and grid discretization.

Every quantity in the solver is either a normal law (demand, supply,
order sizes, vehicle loads) or a discretized version of one (the
purchasing process state). This module owns both representations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy.special import ndtr, ndtri

__all__ = [
    "Gaussian",
    "DiscreteDistribution",
    "normal_cdf",
    "normal_pdf",
    "normal_quantile",
    "partial_expectation_pos",
    "sum_independent",
    "discretize",
    "round_half_up",
]


def round_half_up(x: float) -> int:
    """Round to the nearest integer, halves away from minus infinity."""
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class Gaussian:
    """A normal law N(mean, std^2); std == 0 means a point mass."""

    mean: float
    std: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.mean) and math.isfinite(self.std)):
            raise ValueError("Gaussian parameters must be finite")
        if self.std < 0:
            raise ValueError("Gaussian std must be nonnegative")

    @property
    def variance(self) -> float:
        return self.std * self.std


@dataclass(frozen=True)
class DiscreteDistribution:
    """A pmf on the integer grid origin + k * step, k = 0..len(masses)-1."""

    origin: int
    step: int
    masses: Tuple[float, ...]

    def __post_init__(self) -> None:
        if self.step < 1:
            raise ValueError("step must be a positive integer")
        if not self.masses:
            raise ValueError("empty support")
        if any(m < 0 for m in self.masses):
            raise ValueError("negative probability mass")
        if abs(sum(self.masses) - 1.0) > 1e-9:
            raise ValueError("masses must sum to 1")

    def support(self) -> np.ndarray:
        return self.origin + self.step * np.arange(len(self.masses))

    @property
    def min_value(self) -> int:
        return self.origin

    @property
    def max_value(self) -> int:
        return self.origin + self.step * (len(self.masses) - 1)

    def mean(self) -> float:
        return float(np.dot(self.support(), np.asarray(self.masses)))


def normal_cdf(x: float) -> float:
    """Standard normal CDF."""
    if not math.isfinite(x):
        raise ValueError("normal_cdf requires a finite argument")
    return float(ndtr(x))


def normal_pdf(x: float) -> float:
    """Standard normal density."""
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def normal_quantile(p: float) -> float:
    """Standard normal quantile; rejects p outside the open unit interval."""
    if not (0.0 < p < 1.0):
        raise ValueError("quantile defined only for 0 < p < 1")
    return float(ndtri(p))


def partial_expectation_pos(g: Gaussian) -> float:
    """E[max(X, 0)] for X ~ g; closed form mu*Phi(mu/sigma) + sigma*phi(mu/sigma)."""
    if g.std == 0.0:
        return max(g.mean, 0.0)
    z = g.mean / g.std
    return g.mean * normal_cdf(z) + g.std * normal_pdf(z)


def sum_independent(gs: Sequence[Gaussian]) -> Gaussian:
    """Distribution of the sum of independent normals."""
    if not gs:
        raise ValueError("sum_independent requires a nonempty list")
    mean = sum(g.mean for g in gs)
    var = sum(g.variance for g in gs)
    return Gaussian(mean, math.sqrt(var))


def discretize(g: Gaussian, step: int, tail_mass: float) -> DiscreteDistribution:
    """Project a normal law onto the integer grid with spacing step.

    The support covers the central 1 - tail_mass probability, rounded
    outward to the grid. Grid point k carries the CDF mass of the cell
    [k - step/2, k + step/2); masses are renormalized to sum to 1.
    A zero-std law becomes a point mass at the nearest grid multiple.
    """
    if step < 1 or step != int(step):
        raise ValueError("step must be a positive integer")
    if not (0.0 < tail_mass < 0.1):
        raise ValueError("tail_mass must lie in (0, 0.1)")
    step = int(step)
    if g.std == 0.0:
        k = round_half_up(g.mean / step)
        return DiscreteDistribution(k * step, step, (1.0,))
    z = normal_quantile(tail_mass / 2.0)  # negative
    lo = g.mean + g.std * z
    hi = g.mean - g.std * z
    k_lo = math.floor(lo / step)
    k_hi = math.ceil(hi / step)
    points = np.arange(k_lo, k_hi + 1) * step
    upper = ndtr((points + step / 2.0 - g.mean) / g.std)
    lower = ndtr((points - step / 2.0 - g.mean) / g.std)
    masses = np.asarray(upper - lower, dtype=float)
    masses = np.clip(masses, 0.0, None)
    total = masses.sum()
    if total <= 0.0:
        raise ValueError("degenerate discretization window")
    masses /= total
    return DiscreteDistribution(int(k_lo * step), step, tuple(masses.tolist()))
