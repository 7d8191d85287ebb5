"""The projection complex: vertices joined when nothing large sits between them.

Also the graph diagnostics run on it: distance bounds from large-projection
counts, geodesic containment, ball separation and the bottleneck constant.
"""
from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from quasitree import kernels
from quasitree.core import (BarrierError, _check_params, _large_indices, _sort_indices,
                            find_barrier, is_guard)
from quasitree.report import FLAG, INFO, PASS, Check, status_from


class DisconnectedComplexError(RuntimeError):
    """A modified-mode complex came out disconnected, which should not happen."""


def _csr(adjacency):
    adjacency = np.asarray(adjacency, dtype=bool)
    rows, cols = np.nonzero(adjacency)
    indptr = np.zeros(adjacency.shape[0] + 1, dtype=np.int64)
    np.add.at(indptr, rows + 1, 1)
    return np.cumsum(indptr), cols.astype(np.int64)


@dataclass
class ProjectionComplex:
    system: object
    K: float
    mode: str
    adjacency: np.ndarray
    indptr: np.ndarray = field(repr=False)
    indices: np.ndarray = field(repr=False)
    dist: np.ndarray = field(repr=False)

    @property
    def vertices(self):
        return self.system.vertices

    @property
    def n(self):
        return self.system.n

    @property
    def connected(self):
        return bool((self.dist >= 0).all())

    def distance(self, X, Z):
        d = int(self.dist[self.system.ix(X), self.system.ix(Z)])
        return d if d >= 0 else math.inf

    def neighbors(self, X):
        i = self.system.ix(X)
        return [self.system.vertices[j] for j in self.indices[self.indptr[i]:self.indptr[i + 1]]]

    def edges(self):
        rows, cols = np.nonzero(np.triu(self.adjacency, 1))
        return list(zip(rows.tolist(), cols.tolist()))

    def edge_count(self):
        return int(np.triu(self.adjacency, 1).sum())


def build_complex(system, params, K=None, metric_mode="modified"):
    """Graph on the system's vertices with an edge where no projection exceeds K.

    In modified mode a disconnected result raises DisconnectedComplexError.
    Raw-mode complexes may come out disconnected; check ``.connected``.
    """
    _check_params(system, params)
    K = params.K if K is None else float(K)
    if metric_mode == "modified" and K < params.theta:
        raise ValueError(f"K={K} is below theta={params.theta}")
    if metric_mode == "raw" and K < system.xi:
        raise ValueError(f"K={K} is below xi={system.xi}")
    table = system.table(metric_mode)
    with np.errstate(invalid="ignore"):
        blocked = (table > K).any(axis=0)
    adjacency = ~blocked
    np.fill_diagonal(adjacency, False)
    adjacency = adjacency & adjacency.T
    indptr, indices = _csr(adjacency)
    dist = kernels.bfs_all_pairs(indptr, indices, system.n)
    c = ProjectionComplex(system, K, metric_mode, adjacency, indptr, indices, dist)
    if metric_mode == "modified" and not c.connected:
        comps = len({tuple(row >= 0) for row in dist})
        raise DisconnectedComplexError(
            f"complex at K={K} has {comps} components over {system.n} vertices "
            f"and {c.edge_count()} edges")
    return c


def graph_distance(c, X, Z):
    return c.distance(X, Z)


def distance_bounds(system, params, c, X, Z):
    """``(lower, upper)`` from the Kprime- and K-large set sizes."""
    ix, iz = system.ix(X), system.ix(Z)
    if ix == iz:
        raise ValueError("distance_bounds needs X != Z")
    d = system.table(c.mode)
    upper = len(_large_indices(d, ix, iz, c.K)) + 1
    lower = len(_large_indices(d, ix, iz, params.Kprime)) + 1
    return lower, upper


@dataclass
class ContainmentResult:
    ok: bool
    missing: list
    minimal_threshold: float
    geodesic_count: int
    on_all: list


def _on_all_geodesics(dist, ix, iz):
    """Indices lying on every shortest path from ix to iz.

    A vertex is on every geodesic exactly when it is the only vertex of the
    geodesic DAG at its distance from ix.
    """
    total = dist[ix, iz]
    on = np.flatnonzero((dist[ix] >= 0) & (dist[ix] + dist[:, iz] == total))
    levels = Counter(dist[ix, on].tolist())
    return [int(v) for v in on if levels[int(dist[ix, v])] == 1], on


def geodesic_count(c, ix, iz):
    """Number of shortest paths from ix to iz (exact integer)."""
    dist = c.dist
    total = int(dist[ix, iz])
    if total < 0:
        return 0
    on = np.flatnonzero((dist[ix] >= 0) & (dist[ix] + dist[:, iz] == total))
    by_level = sorted(on.tolist(), key=lambda v: dist[ix, v])
    ways = {ix: 1}
    for v in by_level:
        if v == ix:
            continue
        nb = c.indices[c.indptr[v]:c.indptr[v + 1]]
        ways[v] = sum(ways.get(int(u), 0) for u in nb if dist[ix, u] == dist[ix, v] - 1)
    return ways[iz]


def check_geodesic_containment(system, params, c, X, Z):
    """Every Kprime-large vertex between X and Z must lie on every geodesic."""
    ix, iz = system.ix(X), system.ix(Z)
    if ix == iz:
        raise ValueError("check_geodesic_containment needs X != Z")
    d = system.table(c.mode)
    on_all, _ = _on_all_geodesics(c.dist, ix, iz)
    on_set = set(on_all)
    large = _large_indices(d, ix, iz, params.Kprime)
    missing = [system.vertices[y] for y in large if y not in on_set]
    col = d[:, ix, iz]
    others = [y for y in range(system.n) if y not in on_set and y not in (ix, iz)]
    threshold = float(np.max(col[others])) if others else 0.0
    return ContainmentResult(not missing, missing, threshold, geodesic_count(c, ix, iz),
                             [system.vertices[y] for y in on_all])


def check_midpath_separation(c, system, params, X, Z, radius=2):
    """For each K-large Y between X and Z: does B(Y, radius) minus {X, Z} separate them?"""
    ix, iz = system.ix(X), system.ix(Z)
    if ix == iz:
        raise ValueError("check_midpath_separation needs X != Z")
    d = system.table(c.mode)
    out = {}
    for y in _large_indices(d, ix, iz, c.K):
        blocked = c.dist[y] <= radius
        blocked &= c.dist[y] >= 0
        blocked[ix] = blocked[iz] = False
        out[system.vertices[y]] = not kernels.reachable(c.indptr, c.indices,
                                                        blocked.astype(np.uint8), ix, iz)
    return out


# ---------------------------------------------------------------- all-pairs sweeps


def check_complex(system, params, c):
    """Distance bounds, containment and separation over all ordered pairs."""
    d = system.table(c.mode)
    n = system.n
    upper_bad = lower_bad = cont_bad = sep_bad = 0
    sep_checked = 0
    pairs = 0
    min_kprime = 0.0
    max_upper_slack = 0
    examples = {}
    for ix in range(n):
        for iz in range(ix + 1, n):
            pairs += 1
            dist = int(c.dist[ix, iz])
            X, Z = system.vertices[ix], system.vertices[iz]
            lower, upper = distance_bounds(system, params, c, X, Z)
            if dist > upper or dist < 0:
                upper_bad += 1
                examples.setdefault("upper", [X, Z, dist, upper])
            if dist < lower:
                lower_bad += 1
                examples.setdefault("lower", [X, Z, dist, lower])
            max_upper_slack = max(max_upper_slack, upper - dist)
            res = check_geodesic_containment(system, params, c, X, Z)
            if not res.ok:
                cont_bad += 1
                examples.setdefault("containment", [X, Z, res.missing])
            min_kprime = max(min_kprime, res.minimal_threshold)
            seps = check_midpath_separation(c, system, params, X, Z)
            sep_checked += len(seps)
            for Y, ok in seps.items():
                if not ok:
                    sep_bad += 1
                    examples.setdefault("separation", [X, Y, Z])
    return [
        Check("complex.connected-upper-bound", status_from(upper_bad), pairs, upper_bad,
              measured={"K": c.K, "max_upper_slack": max_upper_slack},
              example=examples.get("upper")),
        Check("complex.kprime-lower-bound", status_from(lower_bad), pairs, lower_bad,
              measured={"Kprime": params.Kprime}, example=examples.get("lower")),
        Check("complex.geodesic-containment", status_from(cont_bad), pairs, cont_bad,
              measured={"Kprime": params.Kprime, "minimal_empirical_Kprime": min_kprime},
              example=examples.get("containment")),
        Check("complex.midpath-separation", status_from(sep_bad), sep_checked, sep_bad,
              example=examples.get("separation")),
    ]


def check_guards(system, params, c):
    """The extreme members of every (K/2)-large set are guards for the ends."""
    d = system.table(c.mode)
    half = c.K / 2
    checked = bad = 0
    example = None
    for ix in range(system.n):
        for iz in range(system.n):
            if ix == iz:
                continue
            members = _large_indices(d, ix, iz, half)
            if len(members) == 0:
                continue
            ordered = _sort_indices(d, system.xi, ix, iz, members)
            X, Z = system.vertices[ix], system.vertices[iz]
            for w, target in ((ordered[0], X), (ordered[-1], Z)):
                checked += 1
                if not is_guard(system, params, system.vertices[w], target, c.K):
                    bad += 1
                    if example is None:
                        example = [X, system.vertices[w], Z]
    return Check("complex.guards", status_from(bad), checked, bad,
                 measured={"half_K": half}, example=example)


def random_walk(c, start, length, rng):
    path = [start]
    for _ in range(length):
        nbrs = c.indices[c.indptr[path[-1]]:c.indptr[path[-1] + 1]]
        if len(nbrs) == 0:
            break
        path.append(int(nbrs[rng.integers(len(nbrs))]))
    return path


def check_barrier_search(system, params, c, walks=50, max_length=10, seed=0):
    """Guard chaining finds a barrier for random walks far from a target.

    Each walk is paired with a random vertex at distance at least 3 from
    every walk vertex; the barrier must pass the definition test and the
    target must see the whole walk within theta.
    """
    rng = np.random.default_rng(seed)
    d = system.table(c.mode)
    n = system.n
    found = failures = consequence_bad = 0
    skipped = 0
    worst = 0.0
    example = None
    for _ in range(walks):
        start = int(rng.integers(n))
        path = random_walk(c, start, int(rng.integers(max_length + 1)), rng)
        far = np.flatnonzero((c.dist[path] >= 3).all(axis=0))
        if far.size == 0:
            skipped += 1
            continue
        iz = int(far[rng.integers(far.size)])
        names = [system.vertices[i] for i in path]
        Z = system.vertices[iz]
        try:
            find_barrier(system, params, c, names, Z)
        except BarrierError:
            failures += 1
            example = example or [*names, Z]
            continue
        found += 1
        spread = max(float(d[iz, path[0], i]) for i in path[1:]) if len(path) > 1 else 0.0
        worst = max(worst, spread)
        if spread >= params.theta:
            consequence_bad += 1
            example = example or [*names, Z]
    attempted = found + failures
    status = status_from(failures + consequence_bad) if attempted else INFO
    return Check("complex.barrier-search", status, attempted,
                 failures + consequence_bad,
                 measured={"found": found, "skipped_walks": skipped, "seed": seed,
                           "max_target_spread": worst, "theta": params.theta},
                 example=example)


# ---------------------------------------------------------------- bottleneck


@dataclass
class BottleneckReport:
    delta: float
    witness: tuple | None
    per_pair: dict = field(default_factory=dict)

    def to_dict(self, names=None):
        def nm(i):
            return names[i] if names is not None else int(i)
        return {
            "delta": self.delta,
            "witness": None if self.witness is None else [nm(i) for i in self.witness],
            "pairs": [{"x": nm(x), "z": nm(z), "delta": v, "midpoint": nm(y)}
                      for (x, z), (v, y) in sorted(self.per_pair.items())],
        }


def _separates(indptr, indices, blocked, x, z):
    return not kernels.reachable(indptr, indices, blocked, x, z)


def pair_bottleneck(reachable, row, x, z, slack, cap):
    """Smallest ball radius around a midpoint of (x, z) that separates them.

    ``reachable(blocked, x, z)`` tests connectivity avoiding ``blocked``;
    ``row(i)`` returns distances from vertex i.  Candidate radii are the
    distinct distances from the midpoint, so the result is exact for
    weighted graphs too.  Radii at or above ``cap`` are not explored and
    ``(cap, None)`` comes back when nothing smaller works.
    """
    dx, dz = row(x), row(z)
    total = dx[z]
    on = np.flatnonzero(np.abs(dx + dz - total) <= 1e-9 * max(1.0, total))
    mids = [int(y) for y in on if abs(dx[y] - dz[y]) <= slack + 1e-9]
    best, best_y = cap, None
    for y in sorted(mids, key=lambda v: (abs(dx[v] - dz[v]), v)):
        dy = row(y)
        radii = np.unique(dy)
        radii = radii[radii < best]
        # separation is monotone in the radius: binary search
        lo, hi = 0, len(radii)
        while lo < hi:
            mid = (lo + hi) // 2
            blocked = dy <= radii[mid]
            blocked[x] = blocked[z] = False
            if not reachable(blocked.astype(np.uint8), x, z):
                hi = mid
            else:
                lo = mid + 1
        if lo < len(radii):
            best, best_y = float(radii[lo]), y
    return best, best_y


def bottleneck_delta(graph, dist=None, pairs=None, min_distance=2.0, slack=1.0):
    """Bottleneck constant of a connected graph.

    ``graph`` is a ProjectionComplex, a square adjacency matrix or a
    ``(indptr, indices)`` pair.  ``dist`` supplies all-pairs (possibly
    weighted) distances; by default unit-length BFS.  Adjacent pairs and
    pairs closer than ``min_distance`` are exempt.  Midpoints are vertices
    on a geodesic whose two distances differ by at most ``slack``.
    """
    if isinstance(graph, ProjectionComplex):
        indptr, indices, n = graph.indptr, graph.indices, graph.n
        if dist is None:
            dist = graph.dist
    elif isinstance(graph, tuple):
        indptr, indices = graph
        n = len(indptr) - 1
    else:
        indptr, indices = _csr(graph)
        n = len(indptr) - 1
    if dist is None:
        dist = kernels.bfs_all_pairs(indptr, indices, n)
    dist = np.asarray(dist, dtype=float)
    if (dist < 0).any():
        raise ValueError("bottleneck_delta needs a connected graph")
    if pairs is None:
        pairs = [(x, z) for x in range(n) for z in range(x + 1, n)]

    def reach(blocked, x, z):
        return kernels.reachable(indptr, indices, blocked, x, z)

    delta, witness = 0.0, None
    per_pair = {}
    cap = float(dist.max()) + 1.0
    for x, z in pairs:
        if dist[x, z] < min_distance or z in indices[indptr[x]:indptr[x + 1]]:
            continue
        value, y = pair_bottleneck(reach, dist.__getitem__, x, z, slack, cap)
        per_pair[(int(x), int(z))] = (value, y)
        if witness is None or value > delta:
            delta, witness = value, (int(x), y, int(z))
    return BottleneckReport(delta, witness, per_pair)


def complex_diameter(c):
    ecc = c.dist.max(axis=1)
    if (c.dist < 0).any():
        return {"diameter": math.inf, "eccentricity": {}}
    hist = Counter(int(e) for e in ecc)
    return {"diameter": int(ecc.max()), "eccentricity": dict(sorted(hist.items()))}


def raw_question(system, params, K=None):
    """Build the complex from raw projection distances and report its shape.

    Nothing is asserted: every entry is informational.
    """
    K = params.K if K is None else K
    raw = build_complex(system, params, K=K, metric_mode="raw")
    mod = build_complex(system, params, K=K, metric_mode="modified")
    measured = {
        "connected": raw.connected,
        "edges_raw": raw.edge_count(),
        "edges_modified": mod.edge_count(),
        "edges_differ": int((raw.adjacency != mod.adjacency).sum()) // 2,
    }
    if raw.connected:
        measured["diameter_raw"] = complex_diameter(raw)["diameter"]
        measured["bottleneck_raw"] = bottleneck_delta(raw).delta
    measured["diameter_modified"] = complex_diameter(mod)["diameter"]
    return [Check("raw.complex-shape", INFO, system.n, 0, measured=measured)]


def bottleneck_check(c, bound=9):
    rep = bottleneck_delta(c)
    status = PASS if rep.delta <= bound else FLAG
    return Check("complex.bottleneck", status, len(rep.per_pair), 0,
                 measured={"delta": rep.delta, "bound": bound},
                 example=None if rep.witness is None else
                 [c.vertices[i] if i is not None else None for i in rep.witness]), rep


# ---------------------------------------------------------------- exports


def to_dot(c, name="projection_complex"):
    lines = [f"graph {name} {{"]
    for v in c.vertices:
        lines.append(f'  "{v}";')
    for i, j in c.edges():
        lines.append(f'  "{c.vertices[i]}" -- "{c.vertices[j]}" [mode="{c.mode}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def distance_bounds_csv(system, params, c):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "z", "lower", "actual", "upper"])
    for ix in range(system.n):
        for iz in range(ix + 1, system.n):
            X, Z = system.vertices[ix], system.vertices[iz]
            lower, upper = distance_bounds(system, params, c, X, Z)
            w.writerow([X, Z, lower, int(c.dist[ix, iz]), upper])
    return buf.getvalue()
