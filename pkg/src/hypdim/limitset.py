"""Boundary point clouds and scale-based dimension / porosity estimators.

Clouds live in half-space boundary coordinates (R^n).  Dyadic box counts
use the quantized-key convention: the box of x at scale k is
[m 2^-k, (m+1) 2^-k)^n with m = floor(x 2^k).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .fitting import EstimationError, fit_slope
from .groups import (
    SchottkySpec,
    enumerate_orbit,
    letter_isometries,
    word_isometry,
    default_base,
)
from .hypcore import (
    DomainError,
    HalfSpacePoint,
    Isometry,
    _sigma,
    fixed_points,
    halfspace_distance,
)

SATURATION_RATIO = 4       # dimension fits only use scales with N_k <= #points / 4
MIN_FIT_SCALES = 4


class ResolutionError(ValueError):
    """Finite sampling too coarse (or too dense) for the requested scales."""


@dataclass(frozen=True)
class PointCloud:
    """Finite point set in R^n with provenance metadata."""

    points: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] not in (1, 2):
            raise DomainError("cloud must be an (N, n) array with n in {1, 2}")
        if not np.all(np.isfinite(pts)):
            raise DomainError("cloud contains non-finite points")
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return len(self.points)

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        return self.points.min(axis=0), self.points.max(axis=0)


@dataclass(frozen=True)
class GridCounts:
    """Occupied dyadic box counts per scale k (box side 2^-k)."""

    n: int
    entries: tuple[tuple[int, int], ...]
    cloud_size: int

    def __post_init__(self):
        ks = [k for k, _ in self.entries]
        if sorted(ks) != ks:
            raise ValueError("grid counts must be sorted by scale")
        for (k1, n1), (k2, n2) in zip(self.entries, self.entries[1:]):
            if k2 == k1 + 1:
                if n2 < n1:
                    raise ValueError(f"N_k must be nondecreasing ({k1}:{n1} -> {k2}:{n2})")
                if n2 > (2 ** self.n) * n1:
                    raise ValueError(f"child-box bound violated at k={k2}")

    def as_dict(self) -> dict[int, int]:
        return dict(self.entries)


@dataclass(frozen=True)
class DimensionEstimate:
    value: float
    window: tuple[float, float]
    stderr: float
    method: str


@dataclass(frozen=True)
class PorosityEstimate:
    value: float
    low_confidence: bool
    table: tuple[tuple[float, float], ...]  # (radius, worst certified hole ratio)


# ---------------------------------------------------------------------------
# limit-set sampling


def sample_limit_set(gens: list[Isometry], depth: int, mode: str = "fixed_points", *,
                     spec: SchottkySpec | None = None,
                     base: HalfSpacePoint | None = None,
                     orbit_radius: float | None = None,
                     r_cap: float = 25.0,
                     keep_band: float | None = None) -> PointCloud:
    """Finite approximation of the limit set.

    mode "fixed_points":   attracting fixed points of all reduced words of
                           length exactly `depth`.
    mode "orbit_projection": radial boundary projections (seen from `base`)
                           of orbit points with distance in
                           [orbit_radius - keep_band, orbit_radius].

    Both modes are deterministic.  A rank-1 spec is flagged in the metadata:
    its limit set is just the two axis endpoints.
    """
    if depth > 16:
        raise DomainError("depth capped at 16")
    if mode not in ("fixed_points", "orbit_projection"):
        raise DomainError(f"unknown sampling mode {mode!r}")
    meta = {"mode": mode, "depth": depth}
    if len(gens) == 1:
        meta["elementary_warning"] = True
        warnings.warn("rank-1 group: limit set is two points", stacklevel=2)
    n = 1 if gens[0].is_real() else 2

    if mode == "fixed_points":
        pts = _fixed_point_cloud(gens, depth, n)
    else:
        if spec is not None and base is None:
            base = default_base(spec)
        if base is None:
            raise DomainError("orbit_projection mode needs a base point or spec")
        by_letter = letter_isometries(gens)
        if orbit_radius is None:
            step = min(halfspace_distance(
                base, _apply(by_letter[l], base)) for l in by_letter)
            orbit_radius = min(depth * step, r_cap)
        if keep_band is None:
            keep_band = max(2.0, 0.25 * orbit_radius)
        records = enumerate_orbit(gens, base, orbit_radius, r_cap=r_cap)
        keep = [r for r in records if r.distance >= orbit_radius - keep_band]
        pts = _radial_projection(base, keep, n)
        meta["orbit_radius"] = orbit_radius
    dropped = int(np.sum(~np.all(np.isfinite(pts), axis=1)))
    if dropped:
        meta["dropped_nonfinite"] = dropped
        pts = pts[np.all(np.isfinite(pts), axis=1)]
    pts = np.unique(pts, axis=0)
    return PointCloud(points=pts, meta=meta)


def _apply(g: Isometry, p: HalfSpacePoint) -> HalfSpacePoint:
    from .hypcore import apply_isometry
    return apply_isometry(g, p)


def _fixed_point_cloud(gens, depth, n) -> np.ndarray:
    by_letter = letter_isometries(gens)
    letters = sorted(by_letter, key=lambda l: (abs(l), 0 if l > 0 else 1))
    entry = {l: by_letter[l].entries for l in letters}
    from .groups import _compose_entries, _renorm_entries

    out = []
    stack = [((), (1.0 + 0j, 0j, 0j, 1.0 + 0j))]
    while stack:
        word, ent = stack.pop()
        if len(word) == depth:
            a, b, c, d = ent
            det = a * d - b * c
            s = complex(det) ** 0.5
            g = Isometry(a / s, b / s, c / s, d / s)
            try:
                z = fixed_points(g)[0]
            except DomainError:
                continue
            out.append((z.real,) if n == 1 else (z.real, z.imag))
            continue
        last = word[-1] if word else 0
        for l in letters:
            if l == -last:
                continue
            e2 = _compose_entries(ent, entry[l])
            if (len(word) + 1) % 8 == 0:
                e2 = _renorm_entries(e2)
            stack.append((word + (l,), e2))
    return np.array(out, dtype=float).reshape(-1, n)


def _radial_projection(base: HalfSpacePoint, records, n) -> np.ndarray:
    """Endpoints on R^n of geodesic rays from `base` through orbit points."""
    if not records:
        return np.zeros((0, n))
    pts = np.array([tuple(r.image.base) + (r.image.height,) for r in records])
    xb = np.asarray(base.base, dtype=float)
    # normalize so the viewpoint is (0, 1), then pass to the ball model
    q = np.empty_like(pts)
    q[:, :-1] = (pts[:, :-1] - xb) / base.height
    q[:, -1] = pts[:, -1] / base.height
    e = np.zeros(n + 1)
    e[-1] = 1.0
    w = q + e
    ball = 2.0 * w / np.sum(w * w, axis=1, keepdims=True) - e
    norms = np.linalg.norm(ball, axis=1, keepdims=True)
    u = ball / np.maximum(norms, 1e-300)
    # boundary form of the model involution, u != south pole
    wu = u + e
    denom = np.sum(wu * wu, axis=1, keepdims=True)
    good = denom[:, 0] > 1e-12
    plane = (2.0 * wu[good] / denom[good] - e)[:, :-1]
    return plane * base.height + xb


# ---------------------------------------------------------------------------
# box counting


def dyadic_keys(points: np.ndarray, k: int) -> np.ndarray:
    """Integer box indices floor(x 2^k), shape (N, n)."""
    return np.floor(np.asarray(points, dtype=float) * (2.0 ** k)).astype(np.int64)


def count_occupied(points: np.ndarray, k: int) -> int:
    keys = dyadic_keys(points, k)
    if keys.shape[1] == 1:
        return len(np.unique(keys[:, 0]))
    lo = keys.min(axis=0)
    span = keys.max(axis=0) - lo + 1
    flat = (keys[:, 0] - lo[0]) * span[1] + (keys[:, 1] - lo[1])
    return len(np.unique(flat))


def occupied_boxes(points: np.ndarray, k: int) -> np.ndarray:
    """Distinct box index vectors at scale k."""
    keys = dyadic_keys(points, k)
    return np.unique(keys, axis=0)


def box_counts(cloud: PointCloud, k_range) -> GridCounts:
    """Exact dyadic box counts N_k over the given scales."""
    if len(cloud) == 0:
        raise DomainError("cloud is empty")
    ks = sorted(int(k) for k in k_range)
    entries = tuple((k, count_occupied(cloud.points, k)) for k in ks)
    return GridCounts(n=cloud.n, entries=entries, cloud_size=len(cloud))


def upper_box_dim(counts: GridCounts, window: tuple[int, int] | None = None, *,
                  saturation_ratio: int = SATURATION_RATIO) -> DimensionEstimate:
    """Slope of log N_k against k log 2 over pre-saturation scales.

    Scales with N_k > cloud_size / saturation_ratio sit at the resolution
    floor of the finite sample and are trimmed from the fit window.
    """
    usable = [(k, c) for k, c in counts.entries
              if c * saturation_ratio <= counts.cloud_size]
    if window is not None:
        lo, hi = window
        usable = [(k, c) for k, c in usable if lo <= k <= hi]
    if len(usable) < MIN_FIT_SCALES:
        raise ResolutionError(
            f"only {len(usable)} pre-saturation scales available; "
            "sample the cloud more deeply or widen k_range")
    ks = np.array([k for k, _ in usable], dtype=float)
    logs = np.log([c for _, c in usable])
    slope, stderr = fit_slope(ks * math.log(2.0), logs)
    value = min(max(slope, 0.0), float(counts.n))
    return DimensionEstimate(value=value, window=(float(ks[0]), float(ks[-1])),
                             stderr=stderr, method="upper-box")


def dimension_window_scan(counts: GridCounts, width: int = 5) -> list[dict]:
    """Sliding-window slopes (reported for limsup/liminf sensitivity)."""
    out = []
    entries = list(counts.entries)
    for i in range(len(entries) - width + 1):
        chunk = entries[i:i + width]
        ks = np.array([k for k, _ in chunk], dtype=float)
        logs = np.log([max(c, 1) for _, c in chunk])
        slope, stderr = fit_slope(ks * math.log(2.0), logs)
        out.append({"k_lo": chunk[0][0], "k_hi": chunk[-1][0],
                    "slope": slope, "stderr": stderr})
    return out


# ---------------------------------------------------------------------------
# porosity


def porosity_estimate(cloud: PointCloud, *, radii=None,
                      center_sample: int = 400,
                      grid_points: int = 33,
                      seed: int = 7) -> PorosityEstimate:
    """Largest hole ratio c certified at every sampled centre and radius.

    For each centre x in the cloud and dyadic radius r, searches candidate
    hole points y in D_r(x) and records max_y dist(y, cloud) / r; the
    estimate is the minimum of these maxima (porosity must hold at *every*
    x and r).  In one dimension candidate holes include all gap midpoints,
    which makes the per-(x, r) search exact.
    """
    pts = cloud.points
    if len(pts) == 0:
        raise DomainError("cloud is empty")
    lo, hi = cloud.bounding_box()
    extent = float(np.max(hi - lo))
    if radii is None:
        k_hi = 3
        radii = [extent * 2.0 ** (-j) for j in range(1, k_hi + 6)]
    rng = np.random.default_rng(seed)
    if len(pts) > center_sample:
        centers = pts[rng.choice(len(pts), size=center_sample, replace=False)]
    else:
        centers = pts

    if cloud.n == 1:
        xs = np.sort(pts[:, 0])
        per_radius = [_porosity_scan_1d(xs, centers[:, 0], r) for r in radii]
    else:
        tree = cKDTree(pts)
        per_radius = [_porosity_scan_nd(tree, centers, r, grid_points) for r in radii]

    value = float(min(per_radius))
    value = min(value, 1.0)
    # holes comparable to the cloud's own sampling pitch are not evidence
    spacing = _median_nn_spacing(pts)
    pitch_ratio = spacing / float(min(radii))
    if cloud.n == 2:
        pitch_ratio = max(pitch_ratio, 2.0 / (grid_points - 1))
    low_confidence = value <= 2.0 * pitch_ratio
    if value <= 0.0:
        value = 0.0
        low_confidence = True
    table = tuple((float(r), float(v)) for r, v in zip(radii, per_radius))
    return PorosityEstimate(value=value, low_confidence=low_confidence, table=table)


def _median_nn_spacing(pts: np.ndarray) -> float:
    if len(pts) < 2:
        return 0.0
    if pts.shape[1] == 1:
        gaps = np.diff(np.sort(pts[:, 0]))
        gaps = gaps[gaps > 0]
        return float(np.median(gaps)) if len(gaps) else 0.0
    d, _ = cKDTree(pts).query(pts, k=2)
    return float(np.median(d[:, 1]))


def _dist_to_sorted(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(xs, ys)
    left = np.where(idx > 0, ys - xs[np.maximum(idx - 1, 0)], np.inf)
    right = np.where(idx < len(xs), xs[np.minimum(idx, len(xs) - 1)] - ys, np.inf)
    return np.minimum(left, right)


def _porosity_scan_1d(xs: np.ndarray, centers: np.ndarray, r: float) -> float:
    mids = (xs[:-1] + xs[1:]) / 2.0
    worst = math.inf
    for x in centers:
        cands = [x - r, x + r]
        lo_i, hi_i = np.searchsorted(mids, [x - r, x + r])
        best = 0.0
        if hi_i > lo_i:
            seg = mids[lo_i:hi_i]
            best = float(np.max(_dist_to_sorted(xs, seg)))
        best = max(best, float(np.max(_dist_to_sorted(xs, np.array(cands)))))
        worst = min(worst, best / r)
    return worst


def _porosity_scan_nd(tree: cKDTree, centers: np.ndarray, r: float,
                      grid_points: int) -> float:
    ax = np.linspace(-r, r, grid_points)
    gx, gy = np.meshgrid(ax, ax)
    offsets = np.stack([gx.ravel(), gy.ravel()], axis=1)
    offsets = offsets[np.linalg.norm(offsets, axis=1) <= r]
    worst = math.inf
    for x in centers:
        d, _ = tree.query(x + offsets)
        worst = min(worst, float(np.max(d)) / r)
    return worst


def default_cn(n: int) -> float:
    """Configurable porosity-bound constant; the bound itself only fixes
    its existence, so the default n 4^-n is deliberately conservative."""
    return n * 4.0 ** (-n)


def porosity_dim_bound(c: float, n: int, cn: float) -> float:
    """Upper box-dimension bound n - C_n c^n from c-porosity, clamped at 0."""
    if not (0.0 < c <= 1.0):
        raise DomainError("porosity constant must lie in (0, 1]")
    if cn <= 0:
        raise DomainError("C_n must be positive")
    return max(0.0, n - cn * c ** n)


def calibrate_cn(measured_dim: float, measured_c: float, n: int,
                 margin: float = 0.95) -> float:
    """Largest C_n (scaled by `margin`) for which the bound still clears a
    measured (dimension, porosity) pair; used to pin C_n on a reference cloud."""
    if measured_c <= 0:
        raise DomainError("cannot calibrate against zero porosity")
    return margin * (n - measured_dim) / measured_c ** n


# ---------------------------------------------------------------------------
# Whitney decomposition of the complement


def whitney_scale_counts(cloud: PointCloud, k_max: int, *, pad: float = 0.25):
    """Per-scale Whitney box counts of the complement of the cloud.

    Returns (sides, accepted, frontier): at scale k the boxes have side
    sides[k]; accepted[k] are boxes with diam <= dist(Q, cloud) <= 4 diam
    (exact box-to-cloud distances), and frontier[k] counts boxes still
    abutting the cloud at that scale.  Frontier boxes at the cutoff stand
    in for complement structure below the sampling resolution.
    """
    pts = cloud.points
    lo, hi = cloud.bounding_box()
    extent = float(np.max(hi - lo))
    if extent == 0.0:
        extent = 1.0
    side0 = extent * (1.0 + 2.0 * pad)
    origin = (lo + hi) / 2.0 - side0 / 2.0
    n = cloud.n

    xs = np.sort(pts[:, 0]) if n == 1 else None
    tree = cKDTree(pts) if n == 2 else None

    boxes = np.zeros((1, n), dtype=np.int64)
    accepted, frontier, sides = [], [], []
    for k in range(k_max + 1):
        side = side0 * 2.0 ** (-k)
        diam = side * math.sqrt(n)
        lows = origin + boxes * side
        if n == 1:
            d = _box_dist_1d(xs, lows[:, 0], side)
        else:
            d = _box_dist_2d(tree, lows, side)
        keep = d >= diam
        accepted.append(int(np.sum(keep)))
        sub = boxes[~keep]
        frontier.append(len(sub))
        sides.append(side)
        if k == k_max or len(sub) == 0:
            break
        children = []
        for off in np.ndindex(*(2,) * n):
            children.append(sub * 2 + np.array(off, dtype=np.int64))
        boxes = np.concatenate(children)
    return sides[:len(accepted)], accepted, frontier


def _box_dist_1d(xs: np.ndarray, lows: np.ndarray, side: float) -> np.ndarray:
    his = lows + side
    idx_lo = np.searchsorted(xs, lows)
    idx_hi = np.searchsorted(xs, his, side="right")
    inside = idx_hi > idx_lo
    left = np.where(idx_lo > 0, lows - xs[np.maximum(idx_lo - 1, 0)], np.inf)
    right = np.where(idx_hi < len(xs), xs[np.minimum(idx_hi, len(xs) - 1)] - his, np.inf)
    out = np.minimum(left, right)
    out[inside] = 0.0
    return out


def _box_dist_2d(tree: cKDTree, lows: np.ndarray, side: float) -> np.ndarray:
    centers = lows + side / 2.0
    halfdiag = side * math.sqrt(2.0) / 2.0
    d_center, _ = tree.query(centers)
    out = np.empty(len(lows))
    for i, (c, dc) in enumerate(zip(centers, d_center)):
        # the point nearest the box lies within dc + halfdiag of the centre
        cand_idx = tree.query_ball_point(c, dc + halfdiag + 1e-12)
        cand = tree.data[cand_idx]
        clamped = np.maximum(np.abs(cand - c) - side / 2.0, 0.0)
        out[i] = float(np.min(np.sqrt(np.sum(clamped ** 2, axis=1))))
    return out


def whitney_exponent(cloud: PointCloud, n: int | None = None,
                     k_max: int = 14, *, pad: float = 0.25,
                     tol: float = 1e-3) -> DimensionEstimate:
    """Critical exponent of sum diam(Q_i)^s over the Whitney boxes.

    Decided by bisection on s: for each trial s the per-scale tail terms
    (M_k + F_k) diam_k^s are fit for growth/decay over the trailing scales.
    """
    if n is None:
        n = cloud.n
    if len(cloud) == 0:
        raise DomainError("cloud is empty")
    sides, accepted, frontier = whitney_scale_counts(cloud, k_max, pad=pad)
    counts = np.array(accepted, dtype=float) + np.array(frontier, dtype=float)
    diams = np.array(sides) * math.sqrt(n)
    if np.sum(accepted) == 0:
        raise ResolutionError("no Whitney boxes resolved; complement too thin "
                              f"at k_max = {k_max}")
    mask = counts > 0
    ks = np.arange(len(counts))[mask]
    counts, diams = counts[mask], diams[mask]
    if len(counts) < MIN_FIT_SCALES:
        raise ResolutionError("too few resolved scales for an exponent estimate")

    tail = slice(max(0, len(ks) - max(5, len(ks) // 2)), None)

    def tail_slope(s: float) -> float:
        terms = np.log(counts) + s * np.log(diams)
        slope, _ = fit_slope(ks[tail], terms[tail])
        return slope

    lo, hi = 0.0, float(n)
    if tail_slope(hi) > 0:
        value = hi
    elif tail_slope(lo) < 0:
        value = lo
    else:
        while hi - lo > tol:
            mid = (lo + hi) / 2.0
            if tail_slope(mid) > 0:
                lo = mid
            else:
                hi = mid
        value = (lo + hi) / 2.0
    count_slope, stderr = fit_slope(-np.log(diams[tail]), np.log(counts[tail]))
    return DimensionEstimate(value=value, window=(float(ks[tail][0]), float(ks[-1])),
                             stderr=stderr, method="whitney")


# ---------------------------------------------------------------------------
# file interfaces


def cloud_to_csv(cloud: PointCloud, path) -> None:
    np.savetxt(path, cloud.points, delimiter=",",
               header=",".join(f"x{i}" for i in range(cloud.n)), comments="")


def cloud_from_csv(path, meta=None) -> PointCloud:
    pts = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return PointCloud(points=pts, meta=meta or {"source": str(path)})
