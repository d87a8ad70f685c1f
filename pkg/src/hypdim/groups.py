"""Schottky groups, pruned orbit enumeration and orbit growth exponents.

A classical Schottky group is given by k pairs of disjoint closed round
disks in the boundary plane R^n; generator g_i maps the exterior of D_i
onto the interior of D_i'.  All words here are reduced words in the
generators, encoded as tuples of signed 1-based indices (+i for g_i,
-i for its inverse).
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .fitting import EstimationError, fit_slope
from .hypcore import (
    DomainError,
    HalfSpacePoint,
    Isometry,
    _apply_entries,
    _compose_entries,
    _renorm_entries,
    halfspace_distance,
)

RENORM_EVERY = 32          # det-1 renormalization cadence along words
DEFAULT_R_CAP = 25.0
DEFAULT_MAX_RECORDS = 50_000_000
FLAT_INCREMENT_EPS = 1e-6  # partial-sum increment considered "flat"


class InvalidSpecError(ValueError):
    """Schottky disk data violating the ping-pong disjointness condition."""


class OrbitBudgetError(RuntimeError):
    """Enumeration exceeded its record budget; carries the completed depth."""

    def __init__(self, message: str, completed_depth: int, partial_records=None):
        super().__init__(message)
        self.completed_depth = completed_depth
        self.partial_records = partial_records or []


@dataclass(frozen=True)
class DiskPair:
    """One generator's disk pair (D, D') in the boundary plane."""

    center: tuple[float, ...]
    radius: float
    center2: tuple[float, ...]
    radius2: float

    def __post_init__(self):
        if self.radius <= 0 or self.radius2 <= 0:
            raise InvalidSpecError("disk radii must be positive")
        if len(self.center) != len(self.center2):
            raise InvalidSpecError("disk centers must share a dimension")


@dataclass(frozen=True)
class SchottkySpec:
    """k disjoint disk pairs; implies a free, convex cocompact group."""

    n: int
    pairs: tuple[DiskPair, ...]

    def __post_init__(self):
        if self.n not in (1, 2):
            raise InvalidSpecError("boundary dimension must be 1 or 2")
        for pair in self.pairs:
            if len(pair.center) != self.n:
                raise InvalidSpecError("disk center dimension does not match n")
        disks = self.all_disks()
        for i in range(len(disks)):
            for j in range(i + 1, len(disks)):
                (ci, ri), (cj, rj) = disks[i], disks[j]
                gap = math.dist(ci, cj) - (ri + rj)
                if gap <= 0:
                    raise InvalidSpecError(
                        f"disks {i} and {j} are not disjoint (gap {gap:.3g})")

    @property
    def rank(self) -> int:
        return len(self.pairs)

    def all_disks(self) -> list[tuple[tuple[float, ...], float]]:
        out = []
        for pair in self.pairs:
            out.append((pair.center, pair.radius))
            out.append((pair.center2, pair.radius2))
        return out

    def disk_for_letter(self, letter: int) -> tuple[tuple[float, ...], float]:
        """Disk that reduced words starting with `letter` land in."""
        pair = self.pairs[abs(letter) - 1]
        if letter > 0:
            return pair.center2, pair.radius2
        return pair.center, pair.radius


@dataclass(frozen=True)
class Word:
    """Reduced word: no letter immediately followed by its inverse."""

    letters: tuple[int, ...]

    def __post_init__(self):
        for u, v in zip(self.letters, self.letters[1:]):
            if u == -v:
                raise ValueError(f"word {self.letters} is not reduced")

    def __len__(self):
        return len(self.letters)

    def __str__(self):
        return word_str(self.letters)


def word_str(letters) -> str:
    """Case encoding: g_1 -> 'a', g_1^-1 -> 'A', g_2 -> 'b', ..."""
    if not letters:
        return "e"
    out = []
    for l in letters:
        if abs(l) > 26:
            raise ValueError("case encoding supports at most 26 generators")
        ch = chr(ord("a") + abs(l) - 1)
        out.append(ch if l > 0 else ch.upper())
    return "".join(out)


def parse_word(s: str) -> tuple[int, ...]:
    if s in ("", "e"):
        return ()
    return tuple((ord(c.lower()) - ord("a") + 1) * (1 if c.islower() else -1) for c in s)


@dataclass(frozen=True)
class OrbitRecord:
    word: Word
    image: HalfSpacePoint
    distance: float


@dataclass(frozen=True)
class ExponentEstimate:
    """Growth exponent from counts N(R) in hyperbolic balls.

    `value` is the least-squares slope of log N(R) against R over `window`;
    `endpoint` is the one-point estimator log N(R_max) / R_max.
    """

    value: float
    window: tuple[float, float]
    stderr: float
    counts: tuple[tuple[float, int], ...]
    endpoint: float


# ---------------------------------------------------------------------------
# construction


def schottky_generators(spec: SchottkySpec) -> list[Isometry]:
    """Generator matrices pairing each (D, D'), g(ext D) = int D'.

    The map is determined by g(infinity) = center(D'), g(center(D)) = infinity
    and boundary-to-boundary images of the tangency directions:

        M = [[c', -r r' - c c'], [1, -c]] / sqrt(r r')

    with centers as real (n = 1) or complex (n = 2) numbers.
    """
    gens = []
    for idx, pair in enumerate(spec.pairs, start=1):
        c = _as_scalar(pair.center)
        c2 = _as_scalar(pair.center2)
        r, r2 = pair.radius, pair.radius2
        s = math.sqrt(r * r2)
        g = Isometry(c2 / s, (-r * r2 - c * c2) / s, 1.0 / s, -c / s,
                     label=word_str((idx,)))
        _verify_pairing(g, pair, idx)
        gens.append(g)
    return gens


def _as_scalar(center: tuple[float, ...]) -> complex:
    if len(center) == 1:
        return complex(center[0])
    return complex(center[0], center[1])


def _verify_pairing(g: Isometry, pair: DiskPair, idx: int, samples: int = 16) -> None:
    """Map sample points of ext D into int D' (ping-pong certificate)."""
    c = _as_scalar(pair.center)
    c2 = _as_scalar(pair.center2)
    for j in range(samples):
        # points just outside D plus a far point
        if j == samples - 1:
            z = c + 50.0 * (abs(c) + pair.radius + 1.0)
        else:
            ang = 2.0 * math.pi * j / (samples - 1)
            z = c + 1.0001 * pair.radius * complex(math.cos(ang), math.sin(ang))
        num = g.a * z + g.b
        den = g.c * z + g.d
        if abs(den) < 1e-14:
            raise InvalidSpecError(f"generator {idx} maps a sample point to infinity")
        if abs(num / den - c2) >= pair.radius2:
            raise InvalidSpecError(
                f"generator {idx} does not map ext D into int D' at sample {j}")


def letter_isometries(gens: list[Isometry]) -> dict[int, Isometry]:
    out = {}
    for i, g in enumerate(gens, start=1):
        out[i] = g
        out[-i] = g.inverse()
    return out


def orbit_point_in_disk(spec: SchottkySpec, letter: int, p: HalfSpacePoint) -> bool:
    """Ping-pong certificate: point lies in the half-ball over the word's disk."""
    center, radius = spec.disk_for_letter(letter)
    dx = np.asarray(p.base) - np.asarray(center)
    return float(dx @ dx) + p.height ** 2 < radius ** 2


# ---------------------------------------------------------------------------
# orbit enumeration


def default_base(spec: SchottkySpec) -> HalfSpacePoint:
    """Base point above all half-balls, hence in the fundamental domain."""
    max_r = max(r for _, r in spec.all_disks())
    centers = np.array([c for c, _ in spec.all_disks()], dtype=float)
    centroid = centers.mean(axis=0)
    return HalfSpacePoint(tuple(centroid), 1.5 * max_r + 0.5)


def enumerate_orbit(gens: list[Isometry], base: HalfSpacePoint, R: float, *,
                    r_cap: float = DEFAULT_R_CAP,
                    max_records: int = DEFAULT_MAX_RECORDS,
                    max_depth: int = 64,
                    threads: int = 1) -> list[OrbitRecord]:
    """All reduced words whose orbit point lies in B_R(base), each exactly once.

    Pruning: a branch is abandoned once its distance exceeds R + slack,
    where slack = max_i d(g_i(base), base) bounds the possible one-letter
    distance decrease.  Output order is by word length, then lexicographic
    in the letter alphabet (a, A, b, B, ...), independent of `threads`.
    """
    if R > r_cap:
        raise DomainError(f"R = {R} exceeds the configured cap {r_cap}")
    by_letter = letter_isometries(gens)
    letters = sorted(by_letter, key=_alphabet_key)
    n = base.n
    base_tuple = tuple(base.base)

    slack = max(halfspace_distance(base, _apply_point(by_letter[l].entries, base, n))
                for l in letters)
    cutoff = R + slack

    records: list[OrbitRecord] = [OrbitRecord(Word(()), base, 0.0)]
    # frontier nodes: (word, entries, age)
    frontier = [((), (1.0 + 0j, 0.0 + 0j, 0.0 + 0j, 1.0 + 0j), 0)]
    entry_table = {l: by_letter[l].entries for l in letters}
    depth = 0

    def expand(node):
        word, entries, age = node
        last = word[-1] if word else 0
        out_children = []
        out_records = []
        for l in letters:
            if l == -last:
                continue
            ent = _compose_entries(entries, entry_table[l])
            a2 = age + 1
            if a2 % RENORM_EVERY == 0:
                ent = _renorm_entries(ent)
            bpt, ht = _apply_entries(ent, base_tuple, base.height, n)
            dist = halfspace_distance(base, HalfSpacePoint(bpt, ht))
            if dist > cutoff:
                continue
            w2 = word + (l,)
            if dist <= R:
                out_records.append(OrbitRecord(Word(w2), HalfSpacePoint(bpt, ht), dist))
            out_children.append((w2, ent, a2))
        return out_children, out_records

    while frontier:
        depth += 1
        if depth > max_depth:
            raise OrbitBudgetError(
                f"depth cap {max_depth} reached", completed_depth=depth - 1,
                partial_records=records)
        if threads > 1 and len(frontier) > 4 * threads:
            chunks = np.array_split(np.arange(len(frontier)), threads)
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(
                    lambda idx: [expand(frontier[i]) for i in idx], chunks))
            expanded = [r for chunk in results for r in chunk]
        else:
            expanded = [expand(node) for node in frontier]
        next_frontier = []
        for children, recs in expanded:
            next_frontier.extend(children)
            records.extend(recs)
        if len(records) > max_records:
            raise OrbitBudgetError(
                f"record budget {max_records} exceeded at depth {depth}",
                completed_depth=depth - 1, partial_records=records)
        frontier = next_frontier
    return records


def _alphabet_key(letter: int) -> tuple[int, int]:
    return (abs(letter), 0 if letter > 0 else 1)


def _apply_point(entries, p: HalfSpacePoint, n: int) -> HalfSpacePoint:
    b, h = _apply_entries(entries, tuple(p.base), p.height, n)
    return HalfSpacePoint(b, h)


def word_isometry(by_letter: dict[int, Isometry], letters) -> Isometry:
    ent = (1.0 + 0j, 0.0 + 0j, 0.0 + 0j, 1.0 + 0j)
    for i, l in enumerate(letters, start=1):
        ent = _compose_entries(ent, by_letter[l].entries)
        if i % RENORM_EVERY == 0:
            ent = _renorm_entries(ent)
    ent = _renorm_entries(ent)
    return Isometry(*ent)


# ---------------------------------------------------------------------------
# growth exponent & Poincare series


def ball_counts(records, r_values) -> list[tuple[float, int]]:
    """N(R) table from orbit records."""
    dists = np.sort(np.array([rec.distance for rec in records]))
    return [(float(r), int(np.searchsorted(dists, r, side="right")))
            for r in np.asarray(r_values, dtype=float)]


def growth_exponent_estimate(records, window: tuple[float, float], *,
                             grid_step: float = 0.5,
                             min_count: int = 10,
                             n: int | None = None) -> ExponentEstimate:
    """Slope of log N(R) against R over the window (the orbit growth exponent).

    Requires at least two grid radii inside the window with N(R) >= min_count.
    """
    lo, hi = window
    if not (hi > lo):
        raise EstimationError("window must satisfy R_min < R_max")
    grid = np.arange(lo, hi + 1e-9, grid_step)
    table = ball_counts(records, grid)
    usable = [(r, c) for r, c in table if c >= min_count]
    if len({r for r, _ in usable}) < 2:
        raise EstimationError(
            f"need >= 2 radii in {window} with N(R) >= {min_count}")
    rs = np.array([r for r, _ in usable])
    logs = np.log([c for _, c in usable])
    slope, stderr = fit_slope(rs, logs)
    r_max, n_max = usable[-1]
    endpoint = math.log(n_max) / r_max if r_max > 0 else 0.0
    value = slope
    if n is not None:
        value = min(max(value, 0.0), float(n))
    return ExponentEstimate(value=value, window=(lo, hi), stderr=stderr,
                            counts=tuple(table), endpoint=endpoint)


def poincare_partial_sum(records, s: float) -> float:
    """Partial Poincare series sum e^{-s d} over the enumerated records."""
    if s <= 0:
        raise DomainError("exponent s must be positive")
    if not records:
        return 0.0
    d = np.array([rec.distance for rec in records])
    return float(np.exp(-s * d).sum())


def poincare_tail_profile(records, s: float, *, r_step: float = 1.0):
    """Partial sums and increments of the Poincare series along R cutoffs.

    Returns (r_values, partial_sums, increments); increments[i] is the mass
    added on (r_values[i-1], r_values[i]].
    """
    d = np.sort(np.array([rec.distance for rec in records]))
    if len(d) == 0:
        return np.array([]), np.array([]), np.array([])
    r_values = np.arange(0.0, d[-1] + r_step, r_step)
    weights = np.exp(-s * d)
    cuts = np.searchsorted(d, r_values, side="right")
    partials = np.concatenate([[0.0], np.cumsum(weights)])[cuts]
    increments = np.diff(partials, prepend=0.0)
    return r_values, partials, increments


def classify_tail(increments, *, flat_eps: float = FLAT_INCREMENT_EPS,
                  tail_fraction: float = 0.3) -> str:
    """Heuristic convergence verdict: 'flat', 'growing' or 'undecided'.

    'flat' means every increment over the trailing window is below flat_eps;
    'growing' means increments trend upward over that window.
    """
    inc = np.asarray(increments, dtype=float)
    inc = inc[inc > 0] if np.any(inc > 0) else inc
    if len(inc) < 3:
        return "undecided"
    k = max(3, int(len(inc) * tail_fraction))
    tail = inc[-k:]
    if np.all(tail < flat_eps):
        return "flat"
    slope, _ = fit_slope(np.arange(len(tail)), np.log(np.maximum(tail, 1e-300)))
    if slope > 0.01:
        return "growing"
    if slope < -0.01:
        return "decaying"
    return "undecided"


# ---------------------------------------------------------------------------
# file interfaces


def save_group_spec(spec: SchottkySpec, path) -> None:
    doc = {"n": spec.n,
           "pairs": [{"center": list(p.center), "radius": p.radius,
                      "center2": list(p.center2), "radius2": p.radius2}
                     for p in spec.pairs]}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_group_spec(path) -> SchottkySpec:
    with open(path) as fh:
        doc = json.load(fh)
    try:
        pairs = tuple(DiskPair(center=tuple(p["center"]), radius=float(p["radius"]),
                               center2=tuple(p["center2"]), radius2=float(p["radius2"]))
                      for p in doc["pairs"])
        return SchottkySpec(n=int(doc["n"]), pairs=pairs)
    except (KeyError, TypeError) as exc:
        raise InvalidSpecError(f"malformed group spec {path}: {exc}") from exc


def orbit_to_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        n = records[0].image.n if records else 1
        writer.writerow(["word"] + [f"x{i}" for i in range(n)] + ["height", "distance"])
        for rec in records:
            writer.writerow([str(rec.word)] + [repr(v) for v in rec.image.base]
                            + [repr(rec.image.height), repr(rec.distance)])
