"""Gaussian bandwidth selection from a neighbour-count integer.

Given ``eta`` the kernel support radius ``R`` is the smallest lattice radius
whose disk holds at least ``eta**2`` lattice points (centre included).  The
bandwidth is then chosen so the Gaussian decays to ``eps_zero`` exactly at
physical distance ``R * h``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

DEFAULT_EPS_ZERO = 1e-14


def lattice_count(r2: int) -> int:
    """Number of integer points ``(a, b)`` with ``a**2 + b**2 <= r2``."""
    k = math.isqrt(r2)
    # for each a, |b| <= isqrt(r2 - a^2)
    return sum(2 * math.isqrt(r2 - a * a) + 1 for a in range(-k, k + 1))


def min_radius_squared(eta: int) -> int:
    if int(eta) != eta or eta < 2:
        raise ValueError(f"eta must be an integer >= 2, got {eta!r}")
    need = eta * eta
    r2 = 1
    while lattice_count(r2) < need:
        r2 += 1
    return r2


def min_radius(eta: int) -> float:
    """Smallest disk radius (in lattice units) containing ``eta**2`` lattice points."""
    return math.sqrt(min_radius_squared(eta))


def select_bandwidth(eta: int, pixel_spacing: float, eps_zero: float = DEFAULT_EPS_ZERO) -> float:
    if not (pixel_spacing > 0):
        raise ValueError("pixel spacing must be positive")
    if not (0 < eps_zero < 1):
        raise ValueError(f"eps_zero must lie in (0, 1), got {eps_zero}")
    r2 = min_radius_squared(eta)
    return r2 * pixel_spacing**2 / math.log(1.0 / eps_zero)


def grid_spacing(m: int, n: int, length: float = 1.0, width: float = 1.0) -> float:
    """Conservative isotropic spacing ``max(length/n, width/m)``."""
    return max(length / n, width / m)


@dataclass(frozen=True)
class BandwidthSelection:
    eta: int
    radius: float  # physical units
    delta: float
    eps_zero: float
    pixel_spacing: float

    @classmethod
    def from_eta(cls, eta: int, pixel_spacing: float, eps_zero: float = DEFAULT_EPS_ZERO):
        delta = select_bandwidth(eta, pixel_spacing, eps_zero)
        return cls(eta, min_radius(eta) * pixel_spacing, delta, eps_zero, pixel_spacing)

    @property
    def lattice_radius(self) -> float:
        return self.radius / self.pixel_spacing
