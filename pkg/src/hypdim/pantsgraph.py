"""Pants-decomposition graphs, isoperimetric profiles and spectral bound chains.

Vertices stand for pairs of pants (hyperbolic area 2 pi each); every edge
and every funnel mark is a closed boundary geodesic of the common length
ell.  Graphs are exposed through a lazy neighbor function so that infinite
families (trees, the square lattice) can be searched within a finite
window without materializing more than the explored ball.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .hypcore import DomainError

TWO_PI = 2.0 * math.pi

AMENABLE_THRESHOLD = 0.05   # phi(m) below this => amenable trend


@dataclass(frozen=True)
class PantsGraph:
    """Multigraph of pants adjacency with uniform boundary length ell.

    `neighbors(v)` returns the multiset of neighbors (loops appear as the
    vertex itself); `funnels(v)` counts funnel boundaries at v.  `kind`
    and `params` record the construction for reports.
    """

    kind: str
    ell: float
    neighbors_fn: object
    funnels_fn: object
    root: object
    params: dict = field(default_factory=dict)

    def neighbors(self, v):
        return self.neighbors_fn(v)

    def funnels(self, v) -> int:
        return self.funnels_fn(v)

    def degree(self, v) -> int:
        return len(self.neighbors(v))


@dataclass(frozen=True)
class IsoProfile:
    """phi(m) = min over connected K containing the root, |K| <= m, of
    |boundary K| / |K|; exact up to `exact_up_to`, heuristic beyond."""

    table: tuple[tuple[int, float], ...]
    root: object
    exact_up_to: int
    heuristic_table: tuple[tuple[int, float], ...]
    verdict: str


@dataclass(frozen=True)
class SpectralChain:
    """Bound chain isoperimetric ratio -> Cheeger range -> spectrum -> exponent."""

    hP: float
    b: float
    B: float
    h_low: float
    h_high: float
    lambda0_low: float
    lambda0_high: float
    delta_low: float
    delta_high: float

    def __post_init__(self):
        if self.h_low < 1.0 - 1e-12:
            raise ValueError("Cheeger constant is never below 1 for these surfaces")
        if self.lambda0_low > self.lambda0_high + 1e-12:
            raise ValueError("lambda0 bounds out of order")


# ---------------------------------------------------------------------------
# graph constructions


def make_graph(kind: str, size: int, ell: float, *, rank: int = 2,
               dim: int = 2) -> PantsGraph:
    """Standard graph families.

    binary_tree   rooted tree branching in two at every vertex, one funnel
                  at the root (vertex ids are heap indices; `size` bounds
                  nothing, the tree is unbounded).
    pruned_tree   same tree with one of every vertex's four depth-2
                  descendants removed; the cut leaves a funnel mark on the
                  removed child's parent (3^j vertices at depth 2j).
    grid          the Z^dim lattice; `size` is ignored (windowing is up to
                  the search).
    free_cayley   2 rank-regular tree: the Cayley graph of a free group.
    """
    if ell <= 0:
        raise DomainError("boundary length ell must be positive")
    if kind == "binary_tree":
        def nbrs(v):
            out = [] if v == 0 else [(v - 1) // 2]
            out.extend((2 * v + 1, 2 * v + 2))
            return out

        def fun(v):
            return 1 if v == 0 else 0

        return PantsGraph(kind, ell, nbrs, fun, root=0, params={})

    if kind == "pruned_tree":
        def present(v):
            while v != 0:
                parent = (v - 1) // 2
                if parent != 0 and parent % 2 == 0:  # v is a right child of a right child
                    grand = (parent - 1) // 2
                    if v == 2 * parent + 2 and _even_depth(grand):
                        return False
                v = parent
            return True

        def nbrs(v):
            out = [] if v == 0 else [(v - 1) // 2]
            out.extend(c for c in (2 * v + 1, 2 * v + 2) if present(c))
            return out

        def fun(v):
            # a funnel replaces each pruned child, plus the original root funnel
            cut = sum(1 for c in (2 * v + 1, 2 * v + 2) if not present(c))
            return cut + (1 if v == 0 else 0)

        return PantsGraph(kind, ell, nbrs, fun, root=0, params={})

    if kind == "grid":
        def nbrs(v):
            out = []
            for axis in range(dim):
                for step in (-1, 1):
                    w = list(v)
                    w[axis] += step
                    out.append(tuple(w))
            return out

        return PantsGraph(kind, ell, nbrs, lambda v: 0,
                          root=(0,) * dim, params={"dim": dim})

    if kind == "free_cayley":
        letters = [l for i in range(1, rank + 1) for l in (i, -i)]

        def nbrs(v):
            out = []
            for l in letters:
                if v and v[-1] == -l:
                    out.append(v[:-1])
                else:
                    out.append(v + (l,))
            return out

        return PantsGraph(kind, ell, nbrs, lambda v: 0,
                          root=(), params={"rank": rank})

    raise DomainError(f"unknown graph kind {kind!r}")


def _even_depth(v) -> bool:
    d = 0
    while v != 0:
        v = (v - 1) // 2
        d += 1
    return d % 2 == 0


def tree_vertices_at_depth(graph: PantsGraph, depth: int) -> list:
    """BFS shell at the given depth from the root (tree kinds only)."""
    shell = [graph.root]
    seen = {graph.root}
    for _ in range(depth):
        nxt = []
        for v in shell:
            for w in graph.neighbors(v):
                if w not in seen:
                    seen.add(w)
                    nxt.append(w)
        shell = nxt
    return shell


def load_graph(path, ell: float) -> PantsGraph:
    """Explicit graph from an edge-list file: lines "u v" and "funnel u"."""
    adj: dict[int, list[int]] = {}
    funnels: dict[int, int] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if parts[0] == "funnel":
                if len(parts) != 2:
                    raise DomainError(f"{path}:{lineno}: malformed funnel line {line!r}")
                funnels[int(parts[1])] = funnels.get(int(parts[1]), 0) + 1
                continue
            if len(parts) != 2:
                raise DomainError(f"{path}:{lineno}: malformed edge line {line!r}")
            u, v = int(parts[0]), int(parts[1])
            adj.setdefault(u, []).append(v)
            if u != v:
                adj.setdefault(v, []).append(u)
            else:
                adj.setdefault(u, [])
    for v in funnels:
        adj.setdefault(v, [])
    if not adj:
        raise DomainError(f"{path}: empty graph")
    root = min(adj)
    reach = _component(adj, root)
    if set(adj) - reach:
        raise DomainError(f"{path}: graph is not connected")
    return PantsGraph("file", ell, lambda v: list(adj.get(v, ())),
                      lambda v: funnels.get(v, 0), root=root,
                      params={"path": str(path), "order": len(adj)})


def _component(adj, root):
    seen = {root}
    stack = [root]
    while stack:
        v = stack.pop()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


# ---------------------------------------------------------------------------
# boundary computations


def vertex_boundary(graph: PantsGraph, K: set) -> set:
    """Vertices of K adjacent to some vertex outside K."""
    return {v for v in K if any(w not in K for w in graph.neighbors(v))}


def boundary_curniture(graph: PantsGraph, K: set) -> int:
    """Number of boundary geodesics of the pants union: edges leaving K
    plus funnel marks inside K; loops contribute nothing."""
    edges_out = 0
    funnels = 0
    for v in K:
        funnels += graph.funnels(v)
        for w in graph.neighbors(v):
            if w not in K:
                edges_out += 1
    return edges_out + funnels


# ---------------------------------------------------------------------------
# isoperimetric search


class _LocalGraph:
    """Integer-id view of a lazy graph, discovered on demand.

    Adjacency is deduplicated and loop-free: boundary computations count
    vertices, so multi-edges and loops are irrelevant to them.
    """

    def __init__(self, graph: PantsGraph, root):
        self.graph = graph
        self.ids = {root: 0}
        self.verts = [root]
        self.adj: list[list[int] | None] = [None]

    def nbrs(self, i: int) -> list[int]:
        cached = self.adj[i]
        if cached is not None:
            return cached
        out = []
        seen = set()
        v = self.verts[i]
        for w in self.graph.neighbors(v):
            if w == v or w in seen:
                continue
            seen.add(w)
            j = self.ids.get(w)
            if j is None:
                j = len(self.verts)
                self.ids[w] = j
                self.verts.append(w)
                self.adj.append(None)
            out.append(j)
        self.adj[i] = out
        return out


def _connected_subsets(graph: PantsGraph, root, max_size: int):
    """Enumerate connected vertex sets containing `root`, each exactly once
    (fixed-order extension with exclusion sets).  Test/oracle path; the
    profile search uses the incremental enumerator below."""
    lg = _LocalGraph(graph, root)
    yield frozenset([root])
    stack = [(frozenset([0]), list(lg.nbrs(0)), 0)]
    while stack:
        vset, ext, start = stack.pop()
        if len(vset) == max_size:
            continue
        for i in range(start, len(ext)):
            w = ext[i]
            new_set = vset | {w}
            yield frozenset(lg.verts[j] for j in new_set)
            if len(new_set) < max_size:
                fresh = [u for u in lg.nbrs(w) if u not in new_set and u not in ext]
                stack.append((new_set, ext + fresh, i + 1))


def _exact_search(graph: PantsGraph, root, max_size: int, budget: int,
                  value_fn: str, ell: float = 1.0):
    """Exact extremum per size over connected sets containing the root.

    value_fn "phi": minimize |vertex boundary| / |K|.
    value_fn "hP":  maximize |K| / boundary-geodesic count.
    Incremental boundary maintenance keeps the per-subset cost O(degree).
    Returns (per-size dict, visited count, exhausted flag).
    """
    lg = _LocalGraph(graph, root)
    nbrs = lg.nbrs
    in_K = {0}
    out_count = {0: len(nbrs(0))}
    boundary = 1 if out_count[0] else 0
    cut_edges = len(nbrs(0))
    funnels_in = graph.funnels(root)

    best: dict[int, float] = {}
    minimize = value_fn == "phi"

    def record():
        m = len(in_K)
        if minimize:
            val = boundary / m
            if val < best.get(m, math.inf):
                best[m] = val
        else:
            val = TWO_PI * m / (ell * max(cut_edges + funnels_in, 1))
            if val > best.get(m, -math.inf):
                best[m] = val

    record()
    visited = 1
    exhausted = True

    def rec(ext: list[int], in_ext: set, start: int):
        nonlocal boundary, cut_edges, funnels_in, visited, exhausted
        if len(in_K) == max_size or visited > budget:
            if visited > budget:
                exhausted = False
            return
        for i in range(start, len(ext)):
            w = ext[i]
            ws = nbrs(w)
            # add w
            w_out = 0
            touched = []
            for u in ws:
                if u in in_K:
                    c = out_count[u] - 1
                    out_count[u] = c
                    touched.append(u)
                    if c == 0:
                        boundary -= 1
                else:
                    w_out += 1
            in_K.add(w)
            out_count[w] = w_out
            if w_out:
                boundary += 1
            cut_edges += w_out - len(touched)
            funnels_in += graph.funnels(lg.verts[w])
            visited += 1
            record()
            fresh = [u for u in ws if u not in in_K and u not in in_ext]
            if fresh and len(in_K) < max_size:
                ext_len = len(ext)
                ext.extend(fresh)
                in_ext.update(fresh)
                rec(ext, in_ext, i + 1)
                del ext[ext_len:]
                in_ext.difference_update(fresh)
            elif len(in_K) < max_size:
                rec(ext, in_ext, i + 1)
            # undo w
            funnels_in -= graph.funnels(lg.verts[w])
            cut_edges -= w_out - len(touched)
            in_K.discard(w)
            del out_count[w]
            if w_out:
                boundary -= 1
            for u in touched:
                if out_count[u] == 0:
                    boundary += 1
                out_count[u] += 1
            if visited > budget:
                exhausted = False
                return
    ext0 = list(nbrs(0))
    rec(ext0, set(ext0) | {0}, 0)
    return best, visited, exhausted


def iso_profile(graph: PantsGraph, root=None, m_exact: int = 10,
                m_heur: int = 4096, *, amen_threshold: float = AMENABLE_THRESHOLD,
                budget: int = 20_000_000) -> IsoProfile:
    """Isoperimetric profile phi(m) with exact small-size search.

    Exact: minimum of |boundary K| / |K| over all connected K containing
    the root with |K| <= m <= m_exact (exponential; capped at 18).
    Heuristic: BFS balls and greedy accretion up to m_heur give upper
    bounds.  The verdict is "amenable-trend" when some heuristic ratio
    drops below the threshold, "nonamenable-trend" when everything stays
    above it.
    """
    if root is None:
        root = graph.root
    if m_exact > 18:
        raise DomainError("exact connected-subgraph search capped at m_exact = 18")
    best, visited, exhausted = _exact_search(graph, root, m_exact, budget, "phi")
    exact_up_to = max(best) if exhausted else max(max(best) - 1, 1)
    table = []
    running = math.inf
    for m in sorted(best):
        running = min(running, best[m])
        table.append((m, running))

    heur = _heuristic_profile(graph, root, m_heur)
    combined = dict(heur)
    for m, phi in table:
        combined[m] = min(combined.get(m, math.inf), phi)
    min_ratio = min(combined.values())
    verdict = "amenable-trend" if min_ratio < amen_threshold else "nonamenable-trend"
    return IsoProfile(table=tuple(table), root=root, exact_up_to=exact_up_to,
                      heuristic_table=tuple(sorted(combined.items())),
                      verdict=verdict)


def _heuristic_profile(graph: PantsGraph, root, m_heur: int) -> dict[int, float]:
    """Upper bounds for phi from BFS balls and greedy accretion."""
    out: dict[int, float] = {}
    # BFS balls: evaluate once per completed shell
    ball = {root}
    shell = [root]
    while len(ball) < m_heur and shell:
        out[len(ball)] = min(out.get(len(ball), math.inf),
                             len(vertex_boundary(graph, ball)) / len(ball))
        nxt = []
        for v in shell:
            for w in graph.neighbors(v):
                if w not in ball:
                    ball.add(w)
                    nxt.append(w)
        shell = nxt
    out[len(ball)] = min(out.get(len(ball), math.inf),
                         len(vertex_boundary(graph, ball)) / len(ball))
    # greedy accretion: absorb the frontier vertex with the most inside
    # neighbors; boundary evaluated at doubling milestones only
    K = {root}
    gains = {w: 1 for w in graph.neighbors(root) if w != root}
    milestone = 8
    while len(K) < m_heur and gains:
        w = max(gains, key=lambda u: (gains[u], repr(u)))
        del gains[w]
        K.add(w)
        for u in graph.neighbors(w):
            if u not in K:
                gains[u] = gains.get(u, 0) + 1
        if len(K) >= milestone:
            out[len(K)] = min(out.get(len(K), math.inf),
                              len(vertex_boundary(graph, K)) / len(K))
            milestone *= 2
    if len(K) > 1:
        out[len(K)] = min(out.get(len(K), math.inf),
                          len(vertex_boundary(graph, K)) / len(K))
    return out


def pants_isoperimetric_sup(graph: PantsGraph, ell: float | None = None, *,
                            m_exact: int = 10, m_heur: int = 4096,
                            budget: int = 2_000_000) -> dict:
    """Sup of 2 pi |K| / (ell * #boundary geodesics of K) over searched K.

    Searched families: exact connected sets at small size, BFS balls and
    greedy accretion up to m_heur.  Funnel marks inside K count as boundary
    geodesics; loops do not.
    """
    if ell is None:
        ell = graph.ell
    root = graph.root
    best = 0.0
    best_K_size = 0
    visited = 0
    for K in _connected_subsets(graph, root, m_exact):
        visited += 1
        if visited > budget:
            break
        ratio = TWO_PI * len(K) / (ell * max(boundary_curniture(graph, K), 1))
        if ratio > best:
            best, best_K_size = ratio, len(K)
    ball = {root}
    shell = [root]
    while len(ball) < m_heur and shell:
        nxt = []
        for v in shell:
            for w in graph.neighbors(v):
                if w not in ball:
                    ball.add(w)
                    nxt.append(w)
        shell = nxt
        ratio = TWO_PI * len(ball) / (ell * max(boundary_curniture(graph, ball), 1))
        if ratio > best:
            best, best_K_size = ratio, len(ball)
    return {"hP": best, "attained_size": best_K_size, "ell": ell}


# ---------------------------------------------------------------------------
# spectral chain


def spectral_chain(hP: float, b: float = 2.0, B: float = 10.0) -> SpectralChain:
    """Bound chain from the pants isoperimetric ratio (n = 1 surfaces).

        h in [max(1, hP), b hP + 1]
        lambda0 in [1 / (4 h_high^2), B / h_low]    (and always <= 1/4)
        delta_high = 1/2 + sqrt(1/4 - lambda0_low)
        delta_low  = 1/2 unless lambda0_high < 1/4
    """
    if hP <= 0 or b <= 0 or B <= 0:
        raise DomainError("hP, b, B must be positive")
    h_low = max(1.0, hP)
    h_high = b * hP + 1.0
    lam_low = 1.0 / (4.0 * h_high ** 2)
    lam_high = B / h_low
    delta_high = 0.5 + math.sqrt(max(0.0, 0.25 - lam_low))
    delta_low = 0.5 if lam_high >= 0.25 else 0.5 + math.sqrt(0.25 - lam_high)
    return SpectralChain(hP=hP, b=b, B=B, h_low=h_low, h_high=h_high,
                         lambda0_low=lam_low, lambda0_high=lam_high,
                         delta_low=delta_low, delta_high=delta_high)


# ---------------------------------------------------------------------------
# hexagon trigonometry (the pair-of-pants half-hexagon)


def hexagon_r(ell: float) -> float:
    """Distance from the half-pants hexagon centre to a side midpoint:
    arccosh sqrt((4 sinh^2(l/4) + 1) / (3 sinh^2(l/4))); decreasing in l."""
    if ell <= 0:
        raise DomainError("boundary length must be positive")
    y = math.sinh(ell / 4.0) ** 2
    return math.acosh(math.sqrt((4.0 * y + 1.0) / (3.0 * y)))


def hexagon_d(ell: float) -> float:
    """Distance between midpoints of two distinct hexagon sides:
    2 arccosh sqrt((5 sinh^2(l/4) + 1) / (4 sinh^2(l/4))); decreasing in l."""
    if ell <= 0:
        raise DomainError("boundary length must be positive")
    y = math.sinh(ell / 4.0) ** 2
    return 2.0 * math.acosh(math.sqrt((5.0 * y + 1.0) / (4.0 * y)))


HEXAGON_R_LIMIT = math.log(3.0) / 2.0
HEXAGON_D_LIMIT = 2.0 * math.acosh(math.sqrt(5.0) / 2.0)


# ---------------------------------------------------------------------------
# dimension-gap evidence


def gap_bounds(example: str, ell: float, b: float = 2.0, B: float = 10.0, *,
               m_exact: int = 8, m_heur: int = 2048) -> dict:
    """Entropy lower bound vs exponent upper bound for the tree examples.

    `example` is "panty" (binary tree; entropy >= log2 / (2 r(ell))) or
    "pruned" (pruned tree; entropy >= log3 / (2 d(ell))).  The exponent
    upper bound comes from the spectral chain applied to the searched
    pants isoperimetric ratio of the matching graph.
    """
    if example == "panty":
        graph = make_graph("binary_tree", 0, ell)
        entropy_low = math.log(2.0) / (2.0 * hexagon_r(ell))
    elif example == "pruned":
        graph = make_graph("pruned_tree", 0, ell)
        entropy_low = math.log(3.0) / (2.0 * hexagon_d(ell))
    else:
        raise DomainError(f"unknown example {example!r}")
    hp = pants_isoperimetric_sup(graph, ell, m_exact=m_exact, m_heur=m_heur)
    chain = spectral_chain(hp["hP"], b, B)
    gap = entropy_low - chain.delta_high
    return {"example": example, "ell": ell,
            "entropy_low": entropy_low, "delta_high": chain.delta_high,
            "gap": gap, "hP": hp["hP"], "chain": chain}


def gap_scan(example: str, ell_grid, b: float = 2.0, B: float = 10.0, *,
             m_exact: int = 8, m_heur: int = 2048) -> dict:
    """Gap table over an ell grid; reports the first ell with a positive gap
    (None when the chain never crosses on the grid)."""
    rows = []
    first_positive = None
    for ell in ell_grid:
        row = gap_bounds(example, float(ell), b, B, m_exact=m_exact, m_heur=m_heur)
        rows.append({k: row[k] for k in
                     ("ell", "entropy_low", "delta_high", "gap", "hP")})
        if first_positive is None and row["gap"] > 0:
            first_positive = float(ell)
    return {"example": example, "b": b, "B": B,
            "rows": rows, "first_positive_ell": first_positive}
