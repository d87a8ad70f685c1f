"""Shipped desk-scale fixtures used by tests, the acceptance suite and the CLI.

The Schottky fixtures are symmetric interval/circle pairs chosen for clean
separation (fast, oscillation-free exponent estimates); the fractal clouds
are standard constructions with known dimensions.
"""

from __future__ import annotations

import numpy as np

from .groups import DiskPair, SchottkySpec


def cyclic_spec(center: float = 4.0, radius: float = 1.0) -> SchottkySpec:
    """Single symmetric interval pair: a hyperbolic cyclic group.

    Translation length along the axis is 2 arccosh(center / radius).
    """
    return SchottkySpec(n=1, pairs=(
        DiskPair(center=(-center,), radius=radius, center2=(center,), radius2=radius),))


def rank2_interval_spec(inner: float = 1.0, outer: float = 3.0,
                        radius: float = 0.72) -> SchottkySpec:
    """Rank-2 Fuchsian Schottky group on four symmetric intervals.

    Intervals centred at -outer, -inner, +inner, +outer with a common
    radius; generator 1 pairs the outer intervals, generator 2 the inner.
    """
    return SchottkySpec(n=1, pairs=(
        DiskPair(center=(-outer,), radius=radius, center2=(outer,), radius2=radius),
        DiskPair(center=(-inner,), radius=radius, center2=(inner,), radius2=radius),
    ))


def rank2_circle_spec(spread: float = 3.0, radius: float = 1.0) -> SchottkySpec:
    """Rank-2 Kleinian Schottky group on four circles in the plane (n = 2)."""
    return SchottkySpec(n=2, pairs=(
        DiskPair(center=(-spread, 0.0), radius=radius,
                 center2=(spread, 0.0), radius2=radius),
        DiskPair(center=(0.0, -spread), radius=radius,
                 center2=(0.0, spread), radius2=radius),
    ))


def cantor_points(depth: int) -> np.ndarray:
    """Endpoints of the level-`depth` middle-third Cantor construction."""
    intervals = np.array([[0.0, 1.0]])
    for _ in range(depth):
        left = np.stack([intervals[:, 0], intervals[:, 0] + np.diff(intervals, axis=1)[:, 0] / 3.0], axis=1)
        right = np.stack([intervals[:, 1] - np.diff(intervals, axis=1)[:, 0] / 3.0, intervals[:, 1]], axis=1)
        intervals = np.concatenate([left, right])
    return np.unique(intervals.ravel()).reshape(-1, 1)


def cantor_gaps(depth: int) -> list[tuple[float, float]]:
    """Removed middle-third gaps down to level `depth`, as (lo, hi) intervals."""
    gaps = []
    intervals = [(0.0, 1.0)]
    for _ in range(depth):
        nxt = []
        for lo, hi in intervals:
            third = (hi - lo) / 3.0
            gaps.append((lo + third, hi - third))
            nxt.append((lo, lo + third))
            nxt.append((hi - third, hi))
        intervals = nxt
    return gaps


def interval_points(log2_count: int = 14, include_right: bool = False) -> np.ndarray:
    """Uniform sample of the unit interval at spacing 2^-log2_count.

    The right endpoint is dropped by default so that exactly 2^k dyadic
    boxes are occupied at every scale k <= log2_count.
    """
    m = 2 ** log2_count
    pts = np.arange(m + (1 if include_right else 0), dtype=float) / m
    return pts.reshape(-1, 1)


def cantor_product_points(depth: int) -> np.ndarray:
    """C x C in the plane; box dimension 2 log2 / log3."""
    c = cantor_points(depth).ravel()
    xx, yy = np.meshgrid(c, c)
    return np.stack([xx.ravel(), yy.ravel()], axis=1)


def two_point_cloud() -> np.ndarray:
    return np.array([[0.0], [1.0]])


def cusped_set_points(k_down: int = 12, k_up: int = 18,
                      lattice_radius: float = 22.0) -> np.ndarray:
    """Vertical ray lattice at x = 0 plus the canonical horoball lattice.

    Column points sit at heights 2^-j (j = 1..k_down) below the horoball
    t >= 1 that carries the dyadic lattice; the natural base point for
    bounded-type probing is (0, 1/2), outside the horoball.
    """
    from .ccentropy import horoball_lattice

    column = np.zeros((k_down, 2))
    column[:, 1] = 2.0 ** (-np.arange(1, k_down + 1, dtype=float))
    lattice = horoball_lattice(1, k_up, lattice_radius).points
    return np.concatenate([column, lattice])
