"""Uniformly distributed sets in hyperbolic space and their exponents.

The dyadic construction places one point per occupied dyadic box: the
"upper centre" ((m + 1/2) 2^-k, 2^-k) of the cuboid over the box.  The
counting exponent of such a set (log point counts in balls over R) is the
operational handle on the convex-core entropy of the underlying boundary
set, and equals its upper box-counting dimension at desk scale.

Atomic measures mu_z^s weight each set point x by e^{-s d(x,z)} / P^s(X, o);
these feed the conformal-ratio and shadow-inequality checks.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .fitting import EstimationError, fit_slope
from .groups import ExponentEstimate
from .hypcore import DomainError, HalfSpacePoint, Horoball, shadow_angular_radii
from .limitset import PointCloud, occupied_boxes

LOG2 = math.log(2.0)
FLAT_INCREMENT_EPS = 1e-6


class SeparationError(ValueError):
    """Point set violates its claimed minimum pairwise distance."""


class DivergenceError(ValueError):
    """Exponent at or below the critical value: partial sums do not settle."""


class InsufficientResolutionError(ValueError):
    """Sampled shadows contain no atoms at the available resolution."""


# ---------------------------------------------------------------------------
# point-set containers


def halfspace_dist_matrix(points: np.ndarray, refs: np.ndarray) -> np.ndarray:
    """Pairwise hyperbolic distances, points (N, n+1) x refs (M, n+1)."""
    p = points[:, None, :]
    q = refs[None, :, :]
    dx2 = np.sum((p[..., :-1] - q[..., :-1]) ** 2, axis=-1)
    arg = 1.0 + (dx2 + (p[..., -1] - q[..., -1]) ** 2) / (2.0 * p[..., -1] * q[..., -1])
    return np.arccosh(np.maximum(arg, 1.0))


def dist_to_point(points: np.ndarray, ref: np.ndarray) -> np.ndarray:
    dx2 = np.sum((points[:, :-1] - ref[:-1]) ** 2, axis=1)
    arg = 1.0 + (dx2 + (points[:, -1] - ref[-1]) ** 2) / (2.0 * points[:, -1] * ref[-1])
    return np.arccosh(np.maximum(arg, 1.0))


def verify_separation(points: np.ndarray, m: float, *, sample_cap: int = 100_000,
                      seed: int = 0) -> None:
    """Check pairwise hyperbolic distance >= m by bucketed neighbor search.

    Points are bucketed by floor(log2 height); candidate pairs are drawn
    from nearby buckets with a Euclidean search radius that dominates the
    hyperbolic ball of radius m.  Above `sample_cap` points, verification
    runs from a seeded sample of centres (still against all points).
    """
    if len(points) < 2:
        return
    heights = points[:, -1]
    levels = np.floor(np.log2(heights)).astype(int)
    level_span = int(math.ceil(m / LOG2)) + 1
    by_level = {}
    for lv in np.unique(levels):
        by_level[lv] = np.nonzero(levels == lv)[0]

    rng = np.random.default_rng(seed)
    if len(points) > sample_cap:
        centre_idx = rng.choice(len(points), size=sample_cap, replace=False)
    else:
        centre_idx = np.arange(len(points))
    centre_levels = levels[centre_idx]

    chord = math.sqrt(2.0 * (math.cosh(m) - 1.0))
    trees = {lv: cKDTree(points[idx]) for lv, idx in by_level.items()}
    for lv, tree in trees.items():
        radius = chord * 2.0 ** (lv + 1)
        sel = centre_idx[np.abs(centre_levels - lv) <= level_span]
        if len(sel) == 0:
            continue
        neighbors = tree.query_ball_point(points[sel], radius)
        for ci, nbrs in zip(sel, neighbors):
            if not nbrs:
                continue
            idx = by_level[lv][nbrs]
            idx = idx[idx != ci]
            if len(idx) == 0:
                continue
            d = dist_to_point(points[idx], points[ci])
            bad = d < m - 1e-9
            if np.any(bad):
                j = int(idx[np.argmax(bad)])
                raise SeparationError(
                    f"points {ci} and {j} are {d[bad][0]:.4f} < {m} apart")


@dataclass(frozen=True)
class UDSet:
    """Uniformly distributed set: separated, coarsely dense point set.

    `density_M` is a recorded certificate (spot-checked against the
    generating cloud at construction); `separation_m` is verified by
    bucketed neighbor search unless `verify=False` was requested.
    """

    points: np.ndarray
    density_M: float
    separation_m: float
    origin_index: int
    declared_horoballs: tuple[Horoball, ...] = ()
    meta: dict = field(default_factory=dict)
    verify: bool = True

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] not in (2, 3):
            raise DomainError("UDS points must be an (N, n+1) array, n in {1, 2}")
        if np.any(pts[:, -1] <= 0):
            raise DomainError("UDS heights must be positive")
        object.__setattr__(self, "points", pts)
        if not (0 <= self.origin_index < len(pts)):
            raise DomainError("origin_index out of range")
        if self.verify:
            verify_separation(pts, self.separation_m)

    @property
    def n(self) -> int:
        return self.points.shape[1] - 1

    def __len__(self):
        return len(self.points)

    @property
    def origin(self) -> np.ndarray:
        return self.points[self.origin_index]

    def distances_from(self, ref: np.ndarray | None = None) -> np.ndarray:
        if ref is None:
            ref = self.origin
        return dist_to_point(self.points, np.asarray(ref, dtype=float))

    def horoball_mask(self) -> np.ndarray:
        """True where a point lies inside one of the declared horoballs."""
        mask = np.zeros(len(self.points), dtype=bool)
        for hb in self.declared_horoballs:
            if hb.tangency.at_infinity:
                mask |= self.points[:, -1] >= hb.size
            else:
                x0 = np.asarray(hb.tangency.require_finite())
                ch = hb.size / 2.0
                dx2 = np.sum((self.points[:, :-1] - x0) ** 2, axis=1)
                mask |= dx2 + (self.points[:, -1] - ch) ** 2 <= ch ** 2
        return mask

    def subset(self, keep: np.ndarray) -> "UDSet":
        keep = np.asarray(keep)
        if keep.dtype == bool:
            keep = np.nonzero(keep)[0]
        if self.origin_index not in set(int(i) for i in keep):
            raise DomainError("subset must retain the origin point")
        new_origin = int(np.nonzero(keep == self.origin_index)[0][0])
        return UDSet(points=self.points[keep], density_M=self.density_M,
                     separation_m=self.separation_m, origin_index=new_origin,
                     declared_horoballs=self.declared_horoballs,
                     meta=dict(self.meta), verify=False)


@dataclass(frozen=True)
class DyadicCuboid:
    """Cuboid over a dyadic box, spanning heights [2^-(k+1), 2^-k]."""

    k: int
    m_vec: tuple[int, ...]

    @property
    def upper_centre(self) -> HalfSpacePoint:
        s = 2.0 ** (-self.k)
        return HalfSpacePoint(tuple((m + 0.5) * s for m in self.m_vec), s)


# ---------------------------------------------------------------------------
# dyadic construction


def build_dyadic_uds(cloud: PointCloud, k_range, separation_m: float = 0.4, *,
                     density_samples: int = 200, seed: int = 0) -> UDSet:
    """Upper centres of all dyadic cuboids whose base box meets the cloud.

    Upper centres are used directly (no nearest-point projection onto a
    hull); greedy lexicographic thinning enforces the separation claim.
    With separation_m <= 0.5 < log 2 the dyadic geometry is already
    separated and thinning removes nothing.
    """
    if len(cloud) == 0:
        raise DomainError("cloud is empty")
    if separation_m > 0.5:
        raise DomainError("separation_m capped at 0.5 for the dyadic build")
    ks = sorted(int(k) for k in k_range)
    pts = []
    level_counts = {}
    for k in ks:
        boxes = occupied_boxes(cloud.points, k)
        s = 2.0 ** (-k)
        centres = np.empty((len(boxes), cloud.n + 1))
        centres[:, :-1] = (boxes + 0.5) * s
        centres[:, -1] = s
        pts.append(centres)
        level_counts[k] = len(boxes)
    points = np.concatenate(pts)
    # distinct upper centres are >= arccosh(1.25) ~ 0.69 apart, so with
    # separation_m <= 0.5 the greedy pass can only be the identity; run it
    # only if the cheap verification actually finds a violation
    try:
        verify_separation(points, separation_m)
    except SeparationError:
        points = _greedy_thin(points, separation_m)

    # origin: level-k_min centre nearest the cloud centroid
    centroid = cloud.points.mean(axis=0)
    top = points[:, -1] == 2.0 ** (-ks[0])
    cand = np.nonzero(top)[0]
    origin_index = int(cand[np.argmin(
        np.sum((points[cand, :-1] - centroid) ** 2, axis=1))])

    density = _density_spot_check(points, cloud, ks, density_samples, seed)
    return UDSet(points=points, density_M=density, separation_m=separation_m,
                 origin_index=origin_index,
                 meta={"construction": "dyadic", "k_range": (ks[0], ks[-1]),
                       "level_counts": level_counts})


def _greedy_thin(points: np.ndarray, m: float) -> np.ndarray:
    """Lexicographic greedy thinning to pairwise distance >= m."""
    order = np.lexsort(points.T[::-1])
    pts = points[order]
    kept_idx = []
    kept_tree_pts = []
    chord = math.sqrt(2.0 * (math.cosh(m) - 1.0))
    tree = None
    dirty = 0
    for i, p in enumerate(pts):
        if kept_tree_pts:
            if tree is None or dirty >= 512:
                tree = cKDTree(np.asarray(kept_tree_pts))
                dirty = 0
            radius = chord * 2.0 * max(p[-1], 1.0)
            cand = tree.query_ball_point(p, radius)
            cand_pts = [kept_tree_pts[j] for j in cand]
            if dirty:
                cand_pts.extend(kept_tree_pts[-dirty:])
            if cand_pts:
                d = dist_to_point(np.asarray(cand_pts), p)
                if np.any(d < m - 1e-12):
                    continue
        kept_idx.append(order[i])
        kept_tree_pts.append(p)
        dirty += 1
    return points[np.sort(np.asarray(kept_idx, dtype=int))]


def _density_spot_check(points, cloud, ks, samples, seed) -> float:
    """Max distance from sampled (cloud point, dyadic height) probes to the set."""
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(cloud), size=min(samples, len(cloud)), replace=False)
    worst = 0.0
    probe_levels = [ks[0], ks[len(ks) // 2], ks[-1]]
    for k in probe_levels:
        probes = np.empty((len(idx), cloud.n + 1))
        probes[:, :-1] = cloud.points[idx]
        probes[:, -1] = 2.0 ** (-k)
        for probe in probes:
            d = dist_to_point(points, probe)
            worst = max(worst, float(d.min()))
    return worst


# ---------------------------------------------------------------------------
# counting exponent (the convex-core entropy estimator)


def counting_exponent(uds: UDSet, r_grid, *, min_count: int = 10,
                      min_points: int = 100) -> ExponentEstimate:
    """Slope of log #(B_R(o) cap X) against R over the grid.

    This is the counting exponent of the set; for a dyadic set over a
    boundary cloud it estimates the cloud's convex-core entropy / upper box
    dimension.
    """
    r_grid = np.asarray(sorted(r_grid), dtype=float)
    d = np.sort(uds.distances_from())
    if int(np.searchsorted(d, r_grid[-1], side="right")) < min_points:
        raise EstimationError(
            f"fewer than {min_points} set points within R_max of the base")
    counts = [(float(r), int(np.searchsorted(d, r, side="right"))) for r in r_grid]
    usable = [(r, c) for r, c in counts if c >= min_count]
    if len(usable) < 2:
        raise EstimationError("need >= 2 grid radii with counts >= min_count")
    rs = np.array([r for r, _ in usable])
    logs = np.log([c for _, c in usable])
    slope, stderr = fit_slope(rs, logs)
    value = min(max(slope, 0.0), float(uds.n))
    endpoint = logs[-1] / rs[-1] if rs[-1] > 0 else 0.0
    return ExponentEstimate(value=value, window=(float(rs[0]), float(rs[-1])),
                            stderr=stderr, counts=tuple(counts), endpoint=endpoint)


def level_grid(r_min: float, r_max: float) -> np.ndarray:
    """R grid in steps of log 2, matching dyadic level spacing (keeps the
    stair-step growth of dyadic sets off the slope fit)."""
    j0 = int(math.ceil(r_min / LOG2))
    j1 = int(math.floor(r_max / LOG2))
    return np.array([j * LOG2 + 0.5 * LOG2 for j in range(j0, j1 + 1)])


# ---------------------------------------------------------------------------
# horoball lattice


@dataclass(frozen=True)
class HoroballLattice:
    """Canonical uniformly distributed set on the horoball t >= 1:
    points (2^k Z)^n x {2^k} for 0 <= k <= k_max, clipped to a window.

    The default window is the hyperbolic ball of the given radius around
    (0, 1), which keeps counting unbiased for every R below the radius;
    window_kind="horizontal" clips |x|_inf instead (a window of 0 leaves a
    single vertical column).
    """

    n: int
    k_max: int
    window: float
    window_kind: str
    points: np.ndarray

    def as_udset(self, verify: bool | None = None) -> UDSet:
        origin = _origin_of_lattice(self.points)
        if verify is None:
            verify = len(self.points) <= 300_000
        return UDSet(points=self.points, density_M=1.0, separation_m=math.log(2.0),
                     origin_index=origin, verify=verify,
                     meta={"construction": "horoball-lattice", "k_max": self.k_max,
                           "window": self.window, "window_kind": self.window_kind})


def _origin_of_lattice(points: np.ndarray) -> int:
    target = np.zeros(points.shape[1])
    target[-1] = 1.0
    return int(np.argmin(np.sum((points - target) ** 2, axis=1)))


def horoball_lattice(n: int, k_max: int, window: float,
                     window_kind: str = "radius") -> HoroballLattice:
    if n not in (1, 2):
        raise DomainError("n must be 1 or 2")
    if k_max > 24:
        raise DomainError("k_max capped at 24")
    if window_kind not in ("radius", "horizontal"):
        raise DomainError("window_kind must be 'radius' or 'horizontal'")
    levels = []
    for k in range(k_max + 1):
        s = 2.0 ** k
        if window_kind == "radius":
            # horizontal reach of B_window((0,1)) at height 2^k
            reach2 = 2.0 * s * (math.cosh(window) - 1.0) - (s - 1.0) ** 2
            if reach2 < 0:
                continue
            m_max = int(math.floor(math.sqrt(reach2) / s))
        else:
            m_max = int(math.floor(window / s))
        coords = np.arange(-m_max, m_max + 1, dtype=float) * s
        if n == 1:
            lv = np.empty((len(coords), 2))
            lv[:, 0] = coords
        else:
            xx, yy = np.meshgrid(coords, coords)
            lv = np.empty((xx.size, 3))
            lv[:, 0] = xx.ravel()
            lv[:, 1] = yy.ravel()
        lv[:, -1] = s
        levels.append(lv)
    return HoroballLattice(n=n, k_max=k_max, window=window,
                           window_kind=window_kind,
                           points=np.concatenate(levels))


# ---------------------------------------------------------------------------
# bounded type


def bounded_type_report(uds: UDSet, r_grid, sample_size: int = 40, *,
                        seed: int = 0, growth_threshold: float = 4.0) -> dict:
    """Worst-case ratio #(X cap B_R(x)) / #(X cap B_R(o)) over sampled x.

    An unbounded-growth flag is raised when the per-R worst ratio increases
    monotonically across the grid and ends more than `growth_threshold`
    above its starting value.
    """
    r_grid = np.asarray(sorted(r_grid), dtype=float)
    rng = np.random.default_rng(seed)
    idx = np.arange(len(uds))
    if len(idx) > sample_size:
        idx = rng.choice(idx, size=sample_size, replace=False)
    # always probe the extreme candidates: farthest points, plus the highest
    # points nearest the horizontal centre (deep cusp probes, unclipped)
    d_all = uds.distances_from()
    xnorm = np.linalg.norm(uds.points[:, :-1] - uds.origin[:-1], axis=1)
    deep_order = np.lexsort((xnorm, -uds.points[:, -1]))
    extremes = np.concatenate([np.argsort(d_all)[-5:], deep_order[:5],
                               [uds.origin_index]])
    idx = np.unique(np.concatenate([idx, extremes]))

    d_o = np.sort(uds.distances_from())
    base_counts = np.searchsorted(d_o, r_grid, side="right")
    if np.any(base_counts == 0):
        raise EstimationError("base counts vanish on part of the grid")

    worst = np.zeros(len(r_grid))
    worst_x = np.full(len(r_grid), -1, dtype=int)
    for i in idx:
        d_x = np.sort(uds.distances_from(uds.points[int(i)]))
        cnt = np.searchsorted(d_x, r_grid, side="right")
        ratio = cnt / base_counts
        better = ratio > worst
        worst[better] = ratio[better]
        worst_x[better] = int(i)
    rho_hat = float(worst.max())
    # growth trend: fitted log-slope clearly positive and total growth large
    trend_slope, _ = fit_slope(r_grid, np.log(np.maximum(worst, 1e-12)))
    unbounded = bool(trend_slope > 0.05
                     and worst[-1] > growth_threshold * max(worst[0], 1.0))
    table = [{"R": float(r), "ratio": float(w), "worst_index": int(wx)}
             for r, w, wx in zip(r_grid, worst, worst_x)]
    return {"rho_hat": rho_hat,
            "worst_x": int(worst_x[np.argmax(worst)]),
            "table": table,
            "trend_slope": float(trend_slope),
            "unbounded_trend": unbounded}


# ---------------------------------------------------------------------------
# atomic measures


@dataclass(frozen=True)
class AtomicMeasure:
    """Purely atomic measure with weights e^{-s d(x, z)} / P^s(X, o)."""

    uds: UDSet
    s: float
    z: np.ndarray
    weights: np.ndarray
    total: float


def atomic_measure(uds: UDSet, s: float, z, *, delta_hat: float | None = None,
                   margin: float = 0.02) -> AtomicMeasure:
    """Normalized atomic measure at exponent s viewed from z.

    Requires s to clear the set's counting exponent (strictly, by `margin`)
    and the empirical partial sums to decay along R; the total mass always
    satisfies e^{-s d(z,o)} <= sigma <= e^{s d(z,o)}.
    """
    z = np.asarray(z, dtype=float)
    d_o = uds.distances_from()
    if delta_hat is not None and s < delta_hat + margin:
        raise DivergenceError(
            f"s = {s} does not clear the exponent estimate {delta_hat} by {margin}")
    _require_decaying_tail(d_o, s)
    d_z = uds.distances_from(z)
    denom = float(np.exp(-s * d_o).sum())
    weights = np.exp(-s * d_z) / denom
    total = float(weights.sum())
    d_zo = float(dist_to_point(uds.origin[None, :], z)[0])
    lo, hi = math.exp(-s * d_zo), math.exp(s * d_zo)
    if not (lo - 1e-9 <= total <= hi + 1e-9):
        raise AssertionError(
            f"total mass {total} outside [{lo}, {hi}]; invariant violated")
    return AtomicMeasure(uds=uds, s=s, z=z, weights=weights, total=total)


def _require_decaying_tail(distances: np.ndarray, s: float,
                           r_step: float = LOG2, slope_tol: float = 0.05) -> None:
    """Backstop divergence check: increments of the partial sums, bucketed at
    dyadic-level spacing, must not trend upward along R."""
    d = np.sort(distances)
    r_values = np.arange(0.0, d[-1] + r_step, r_step)
    cuts = np.searchsorted(d, r_values, side="right")
    partials = np.concatenate([[0.0], np.cumsum(np.exp(-s * d))])[cuts]
    inc = np.diff(partials)
    inc = inc[inc > 0]
    if len(inc) >= 6:
        k = max(4, len(inc) // 2)
        slope, _ = fit_slope(np.arange(k) * r_step, np.log(inc[-k:]))
        if slope > slope_tol:
            raise DivergenceError(
                f"partial sums at s = {s} are not settling (tail slope {slope:.3g})")


def modified_poincare_sum(uds: UDSet, h, s: float, z=None) -> float:
    """Partial modified series sum h(d(x,z)) e^{-s d(x,z)} over the set."""
    if s <= 0:
        raise DomainError("exponent s must be positive")
    d = uds.distances_from(None if z is None else np.asarray(z, dtype=float))
    return float(np.sum(h(d) * np.exp(-s * d)))


def modified_tail_profile(uds: UDSet, h, s: float, *, r_step: float = 1.0):
    """(r_values, partial sums, increments) of the modified series."""
    d = np.sort(uds.distances_from())
    vals = h(d) * np.exp(-s * d)
    r_values = np.arange(0.0, d[-1] + r_step, r_step)
    cuts = np.searchsorted(d, r_values, side="right")
    partials = np.concatenate([[0.0], np.cumsum(vals)])[cuts]
    return r_values, partials, np.diff(partials, prepend=0.0)


@dataclass(frozen=True)
class PattersonFunction:
    """Slowly varying weight h for the modified series.

    family "constant" is h == 1; family "log-power" is h(t) = (1 + t)^beta.
    Both are non-decreasing and submultiplicative up to a constant C, which
    `certificate` verifies numerically on a grid.
    """

    family: str = "constant"
    beta: float = 0.0

    def __post_init__(self):
        if self.family not in ("constant", "log-power"):
            raise DomainError(f"unknown Patterson family {self.family!r}")
        if self.beta < 0:
            raise DomainError("beta must be nonnegative")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.family == "constant":
            return np.ones_like(t)
        return (1.0 + t) ** self.beta

    def certificate(self, *, t_grid=None, eps_grid=(0.5, 0.2, 0.1, 0.05)) -> dict:
        """Numeric checks of monotonicity, subexponential growth and
        submultiplicativity; reports the submultiplicative constant C."""
        if t_grid is None:
            t_grid = np.linspace(0.01, 60.0, 240)
        vals = self(t_grid)
        monotone = bool(np.all(np.diff(vals) >= -1e-12))
        eps_ok = {}
        for eps in eps_grid:
            # h(t + r) <= e^{eps t} h(r) for r >= r0: check at r0 = grid tail
            r0 = t_grid[len(t_grid) // 2]
            ts = t_grid
            ok = np.all(self(ts + r0) <= np.exp(eps * ts) * self(r0) * (1 + 1e-9))
            eps_ok[eps] = bool(ok)
        rr, tt = np.meshgrid(t_grid, t_grid)
        ratio = self(rr + tt) / (self(rr) * self(tt))
        C = float(np.max(ratio))
        return {"non_decreasing": monotone, "eps_checks": eps_ok,
                "submultiplicative_C": C}


# ---------------------------------------------------------------------------
# ball-model view and the shadow inequality


def to_ball_coords(uds: UDSet) -> np.ndarray:
    """Ball-model coordinates with the set's base point at the origin."""
    o = uds.origin
    q = np.empty_like(uds.points)
    q[:, :-1] = (uds.points[:, :-1] - o[:-1]) / o[-1]
    q[:, -1] = uds.points[:, -1] / o[-1]
    e = np.zeros(uds.n + 1)
    e[-1] = 1.0
    w = q + e
    return 2.0 * w / np.sum(w * w, axis=1, keepdims=True) - e


def shadow_check(uds: UDSet, ell: float, delta: float, s_list, *,
                 sample_size: int = 60, seed: int = 1,
                 depth_band: tuple[float, float] = (2.0, 9.0),
                 violation_factor: float = 10.0) -> dict:
    """Fit the smallest A with A (diam S(x, ell))^delta >= mu_o^s(S(x, ell)).

    For each s in the (decreasing) ladder, samples set points x in the given
    distance band, sums the weights of atoms lying in the shadow region of
    B(x, ell) (radial projection inside the cap and depth >= d(o, x) - ell;
    the depth cut keeps bulk atoms that merely project into a deep cap from
    polluting its mass), and reports the per-s fitted A plus its stability
    across the ladder.  `violations` counts samples whose required A
    exceeds `violation_factor` times the per-s median.
    """
    ball = to_ball_coords(uds)
    norms = np.linalg.norm(ball, axis=1)
    dists = uds.distances_from()
    dirs = ball / np.maximum(norms[:, None], 1e-300)

    rng = np.random.default_rng(seed)
    lo, hi = depth_band
    cand = np.nonzero((dists >= lo) & (dists <= hi))[0]
    if len(cand) == 0:
        raise InsufficientResolutionError("no set points in the sampling band")
    if len(cand) > sample_size:
        cand = rng.choice(cand, size=sample_size, replace=False)

    axes = dirs[cand]
    thetas = shadow_angular_radii(norms[cand], ell)
    diams = 2.0 * thetas
    cos_thetas = np.cos(thetas)

    depth_cuts = dists[cand] - ell
    per_s = []
    for s in s_list:
        mu = atomic_measure(uds, float(s), uds.origin)
        cap_mass = np.empty(len(cand))
        for j, (axis, ct) in enumerate(zip(axes, cos_thetas)):
            inside = (dirs @ axis >= ct) & (dists >= depth_cuts[j])
            cap_mass[j] = float(mu.weights[inside].sum())
        occupied = cap_mass > 0
        if not np.any(occupied):
            raise InsufficientResolutionError(
                f"no atoms fall in any sampled shadow at s = {s}")
        a_req = cap_mass[occupied] / diams[occupied] ** delta
        med = float(np.median(a_req))
        per_s.append({
            "s": float(s),
            "A_fit": float(np.max(a_req)),
            "median_A": med,
            "violations": int(np.sum(a_req > violation_factor * med)),
            "shadows_with_atoms": int(np.sum(occupied)),
        })
    fits = np.array([row["A_fit"] for row in per_s])
    stability = float(fits.max() / fits.min()) if np.all(fits > 0) else math.inf
    drift = np.all(np.diff(fits) > 0) or np.all(np.diff(fits) < 0)
    return {"per_s": per_s,
            "A_stability_ratio": stability,
            "monotone_drift": bool(drift and len(fits) >= 3),
            "violations": int(sum(row["violations"] for row in per_s)),
            "delta": float(delta), "ell": float(ell)}


# ---------------------------------------------------------------------------
# tightness audit


def tightness_audit(uds: UDSet, cloud: PointCloud, l_grid, *,
                    sample_size: int = 200, grid_points: int = 17,
                    seed: int = 3) -> dict:
    """Certified distance-to-hull-boundary profile of the set.

    A point (x, t) is certified deep when every candidate point of the disk
    D_r(x) lies within c r of the cloud (so the cuboid D_r(x) x [cr, inf)
    sits over hull structure); the inscribed-ball radius log(1 + 2/c)/2
    minus the offset to the point is its certified depth.  l_hat is the
    worst depth over points outside the declared horoballs; the weak flag
    is set when only declared-horoball points reach the top of the grid.
    """
    l_grid = np.asarray(sorted(l_grid), dtype=float)
    rng = np.random.default_rng(seed)
    mask_horo = uds.horoball_mask()
    outside = np.nonzero(~mask_horo)[0]
    if len(outside) == 0:
        raise DomainError("all set points lie in declared horoballs")
    sample = outside
    if len(sample) > sample_size:
        sample = rng.choice(outside, size=sample_size, replace=False)

    xs = np.sort(cloud.points[:, 0]) if cloud.n == 1 else None
    tree = cKDTree(cloud.points) if cloud.n == 2 else None

    depths = np.zeros(len(sample))
    for j, i in enumerate(sample):
        p = uds.points[int(i)]
        depths[j] = _certified_depth(p, xs, tree, cloud.n, l_grid, grid_points)
    l_hat = float(depths.max()) if len(depths) else 0.0
    cap = float(l_grid[-1])
    capped_outside = bool(np.any(depths >= cap - 1e-9))

    horoball_hits = []
    for hb_idx, hb in enumerate(uds.declared_horoballs):
        if np.any(mask_horo & _single_horoball_mask(uds, hb)):
            horoball_hits.append(hb_idx)
    weak_flag = bool(len(horoball_hits) > 0 and not capped_outside)
    return {"l_hat": l_hat,
            "weak_flag": weak_flag,
            "depth_at_resolution_cap": capped_outside,
            "horoball_list": horoball_hits,
            "sampled": int(len(sample))}


def _single_horoball_mask(uds: UDSet, hb: Horoball) -> np.ndarray:
    if hb.tangency.at_infinity:
        return uds.points[:, -1] >= hb.size
    x0 = np.asarray(hb.tangency.require_finite())
    ch = hb.size / 2.0
    dx2 = np.sum((uds.points[:, :-1] - x0) ** 2, axis=1)
    return dx2 + (uds.points[:, -1] - ch) ** 2 <= ch ** 2


def _certified_depth(p, xs, tree, n, l_grid, grid_points) -> float:
    x, t = p[:-1], p[-1]
    best = 0.0
    for ell in l_grid:
        c = 2.0 * math.exp(-2.0 * ell)
        found = False
        for r in np.geomspace(t / (2.0 + c) * 1.05, t / c * 0.95, 4):
            if not _disk_is_hole_free(x, r, c * r, xs, tree, n, grid_points):
                continue
            # inscribed ball over D_r(x): hyperbolic centre and radius
            centre = np.append(x, r * math.sqrt(c * c + 2.0 * c))
            rho = 0.5 * math.log(1.0 + 2.0 / c)
            d = float(dist_to_point(p[None, :], centre)[0])
            if rho - d > best:
                best = rho - d
                found = True
        if not found and best < ell:
            break
    return best


def _disk_is_hole_free(x, r, clearance, xs, tree, n, grid_points) -> bool:
    if n == 1:
        ys = np.linspace(x[0] - r, x[0] + r, grid_points)
        idx = np.searchsorted(xs, ys)
        left = np.where(idx > 0, ys - xs[np.maximum(idx - 1, 0)], np.inf)
        right = np.where(idx < len(xs), xs[np.minimum(idx, len(xs) - 1)] - ys, np.inf)
        return bool(np.all(np.minimum(left, right) < clearance))
    ax = np.linspace(-r, r, grid_points)
    gx, gy = np.meshgrid(ax, ax)
    offs = np.stack([gx.ravel(), gy.ravel()], axis=1)
    offs = offs[np.linalg.norm(offs, axis=1) <= r]
    d, _ = tree.query(x + offs)
    return bool(np.all(d < clearance))


# ---------------------------------------------------------------------------
# file interfaces


def uds_to_csv(uds: UDSet, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i}" for i in range(uds.n)] + ["height"])
        for row in uds.points:
            writer.writerow([repr(v) for v in row])


def uds_from_csv(path, *, density_M=2.0, separation_m=0.4,
                 origin_index=None, verify=True) -> UDSet:
    pts = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if origin_index is None:
        origin_index = int(np.argmax(pts[:, -1]))
    return UDSet(points=pts, density_M=density_M, separation_m=separation_m,
                 origin_index=origin_index, verify=verify,
                 meta={"source": str(path)})


def measure_to_csv(measure: AtomicMeasure, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        n = measure.uds.n
        writer.writerow([f"x{i}" for i in range(n)] + ["height", "weight"])
        for row, w in zip(measure.uds.points, measure.weights):
            writer.writerow([repr(v) for v in row] + [repr(float(w))])
