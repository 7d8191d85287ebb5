"""The blown-up space: each vertex replaced by a copy of its geodesic.

Every geodesic becomes a path graph with integer arclength nodes over a
window around its projection data.  Vertices adjacent in the projection
complex are joined by bridges of length L from every anchor node of one
projection to every anchor node of the other.  Distances are weighted
shortest paths.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from quasitree import kernels
from quasitree.complex import pair_bottleneck
from quasitree.core import OrderError, _check_params, order_interval
from quasitree.report import FLAG, INFO, PASS, Check, status_from

TOL = 1e-9


class WindowError(RuntimeError):
    """An anchor fell outside its vertex space's truncation window."""


@dataclass(frozen=True)
class PointRef:
    vertex: str
    node: int

    def __str__(self):
        return f"{self.vertex}:{self.node}"


def anchor_nodes(lo, hi):
    """Integer nodes realizing the interval ``[lo, hi]`` on the unit mesh.

    The integers inside the interval, or the rounded midpoint when there are
    none.  Either way the set's diameter is at most ``hi - lo``.
    """
    a, b = math.ceil(lo - TOL), math.floor(hi + TOL)
    if a <= b:
        return tuple(range(a, b + 1))
    return (int(round((lo + hi) / 2)),)


@dataclass
class VertexSpace:
    owner: str
    index: int
    lo: int
    hi: int
    offset: int
    anchors: dict = field(repr=False)  # other vertex index -> tuple of nodes

    @property
    def size(self):
        return self.hi - self.lo + 1

    def node_index(self, node):
        if not self.lo <= node <= self.hi:
            raise ValueError(f"node {node} outside window [{self.lo}, {self.hi}] of {self.owner}")
        return self.offset + node - self.lo

    def nodes(self):
        return range(self.lo, self.hi + 1)


class BlowupSpace:
    """Weighted graph of vertex spaces and bridges, with cached Dijkstra rows."""

    def __init__(self, system, params, complex_, spaces, graph, bridge_count):
        self.system = system
        self.params = params
        self.complex = complex_
        self.spaces = spaces
        self.graph = graph
        self.L = params.L
        self.bridge_count = bridge_count
        self.n_nodes = graph.shape[0]
        self._owner = np.empty(self.n_nodes, dtype=np.int64)
        self._coord = np.empty(self.n_nodes, dtype=np.int64)
        for sp in spaces:
            self._owner[sp.offset:sp.offset + sp.size] = sp.index
            self._coord[sp.offset:sp.offset + sp.size] = np.arange(sp.lo, sp.hi + 1)
        self._rows = {}
        self._unweighted = None

    def space(self, vertex):
        return self.spaces[self.system.ix(vertex)]

    def index(self, p):
        return self.space(p.vertex).node_index(p.node)

    def ref(self, g):
        return PointRef(self.system.vertices[self._owner[g]], int(self._coord[g]))

    def owner(self, g):
        return int(self._owner[g])

    def coord(self, g):
        return int(self._coord[g])

    def row(self, g):
        """Distances from global node ``g`` to every node."""
        g = int(g)
        r = self._rows.get(g)
        if r is None:
            r = dijkstra(self.graph, directed=False, indices=g)
            if len(self._rows) > 4096:
                self._rows.clear()
            self._rows[g] = r
        return r

    def rows(self, sources):
        sources = [int(s) for s in sources]
        missing = [s for s in sources if s not in self._rows]
        if missing:
            block = dijkstra(self.graph, directed=False, indices=missing)
            for s, r in zip(missing, block):
                self._rows[s] = r
        return np.array([self._rows[s] for s in sources])

    def all_pairs(self):
        return dijkstra(self.graph, directed=False)

    def csr(self):
        """Unweighted CSR structure for reachability tests."""
        if self._unweighted is None:
            g = self.graph.tocsr()
            self._unweighted = (g.indptr.astype(np.int64), g.indices.astype(np.int64))
        return self._unweighted

    def edge_list(self):
        g = self.graph.tocoo()
        keep = g.row < g.col
        return [(int(a), int(b), float(w)) for a, b, w in zip(g.row[keep], g.col[keep], g.data[keep])]


def build_blowup(system, params, complex_):
    """Vertex spaces with anchors and L-bridges along the complex's edges."""
    _check_params(system, params)
    if system.n == 0:
        raise ValueError("cannot blow up an empty system")
    if not hasattr(system, "interval"):
        raise TypeError("the system has no geometry to build vertex spaces from")
    if complex_.mode != "modified":
        raise ValueError("the blowup is built over the modified-mode complex")
    margin = math.ceil(2 * params.K)
    spaces = []
    offset = 0
    for iy, owner in enumerate(system.vertices):
        anchors = {}
        for ix in range(system.n):
            if ix != iy:
                anchors[ix] = anchor_nodes(*system.interval(iy, ix))
        pts = [a for nodes in anchors.values() for a in nodes] or [0]
        lo, hi = min(pts) - margin, max(pts) + margin
        sp = VertexSpace(owner, iy, lo, hi, offset, anchors)
        for nodes in anchors.values():
            if nodes[0] < lo or nodes[-1] > hi:
                raise WindowError(f"anchor outside the window of {owner}")
        spaces.append(sp)
        offset += sp.size
    rows, cols, weights = [], [], []
    for sp in spaces:
        base = np.arange(sp.offset, sp.offset + sp.size - 1)
        rows.append(base)
        cols.append(base + 1)
        weights.append(np.ones(base.size))
    bridges = 0
    for ix, iz in complex_.edges():
        a = [spaces[ix].node_index(k) for k in spaces[ix].anchors[iz]]
        b = [spaces[iz].node_index(k) for k in spaces[iz].anchors[ix]]
        aa, bb = np.meshgrid(a, b, indexing="ij")
        rows.append(aa.ravel())
        cols.append(bb.ravel())
        weights.append(np.full(aa.size, params.L))
        bridges += aa.size
    r = np.concatenate(rows) if rows else np.zeros(0, int)
    c = np.concatenate(cols) if cols else np.zeros(0, int)
    w = np.concatenate(weights) if weights else np.zeros(0)
    graph = csr_matrix((np.concatenate([w, w]), (np.concatenate([r, c]), np.concatenate([c, r]))),
                       shape=(offset, offset))
    return BlowupSpace(system, params, complex_, spaces, graph, bridges)


def blowup_distance(space, p, q):
    return float(space.row(space.index(p))[space.index(q)])


# ---------------------------------------------------------------- point conventions


def _point_interval(space, iy, g):
    """Projection of global node ``g`` onto vertex ``iy`` as a coordinate interval."""
    owner = space.owner(g)
    if owner == iy:
        u = float(space.coord(g))
        return u, u
    return space.system.interval(iy, owner)


def point_d(space, iy, gx, gz):
    """Modified distance between two points as seen from vertex ``iy``.

    When neither point lies in ``iy``'s space this is the modified distance
    between their spaces (the projection diameter when they share a space).
    Otherwise the raw diameter of the union of projections, using the point
    itself on its own space.
    """
    X, Z = space.owner(gx), space.owner(gz)
    if iy not in (X, Z):
        return float(space.system.modified_table[iy, X, Z])
    a = _point_interval(space, iy, gx)
    b = _point_interval(space, iy, gz)
    return max(a[1], b[1]) - min(a[0], b[0])


def point_dpi(space, iy, gx, gz):
    """Raw projection diameter of two points seen from ``iy``."""
    a = _point_interval(space, iy, gx)
    b = _point_interval(space, iy, gz)
    return max(a[1], b[1]) - min(a[0], b[0])


def point_large_set(space, gx, gz, threshold):
    """``[(vertex index, value)]`` with point distance above ``threshold``."""
    out = []
    for iy in range(space.system.n):
        v = point_d(space, iy, gx, gz)
        if v > threshold:
            out.append((iy, v))
    return out


# ---------------------------------------------------------------- isometric embedding


def check_isometric_embedding(space, Y):
    """True when distances inside C(Y) equal distances in the whole space."""
    sp = space.space(Y)
    if sp.size == 1:
        return True
    src = np.arange(sp.offset, sp.offset + sp.size)
    block = space.rows(src)[:, sp.offset:sp.offset + sp.size]
    internal = np.abs(np.subtract.outer(np.arange(sp.size), np.arange(sp.size)))
    return bool(np.all(np.abs(block - internal) <= TOL))


def _projection_matrix(space, iy):
    """Raw point projection diameters onto ``iy`` for all node pairs."""
    lo = np.empty(space.n_nodes)
    hi = np.empty(space.n_nodes)
    for sp in space.spaces:
        sl = slice(sp.offset, sp.offset + sp.size)
        if sp.index == iy:
            lo[sl] = hi[sl] = np.arange(sp.lo, sp.hi + 1)
        else:
            lo[sl], hi[sl] = space.system.interval(iy, sp.index)
    return np.maximum.outer(hi, hi) - np.minimum.outer(lo, lo)


def check_total_geodesy(space, max_nodes=2000):
    """Embedding check for every vertex space plus the projection lower bound.

    The lower bound compares the blowup distance with the raw point
    projection diameter onto each vertex Y: equal when both points lie in
    C(Y), strictly larger otherwise.  Pairs inside one space other than Y
    are skipped, since there the diameter of that space's projection is a
    positive floor while the distance can be zero.  Needs the all-pairs
    table, so it is skipped above ``max_nodes``.
    """
    bad_embed = [sp.owner for sp in space.spaces if not check_isometric_embedding(space, sp.owner)]
    out = [Check("blowup.total-geodesy", status_from(len(bad_embed)), len(space.spaces),
                 len(bad_embed), measured={"nodes": space.n_nodes},
                 example=bad_embed[:5] or None)]
    if space.n_nodes <= max_nodes:
        D = space.all_pairs()
        owner = space._owner
        same = np.equal.outer(owner, owner)
        bad = checked = 0
        worst = math.inf
        for iy in range(space.system.n):
            gap = D - _projection_matrix(space, iy)
            inside = owner == iy
            both = np.logical_and.outer(inside, inside)
            strict = ~same
            bad += int((np.abs(gap[both]) > TOL).sum()) + int((gap[strict] <= TOL).sum())
            checked += int(both.sum()) + int(strict.sum())
            worst = min(worst, float(gap[strict].min()) if strict.any() else math.inf)
        out.append(Check("blowup.projection-lower-bound", status_from(bad), checked, bad,
                         measured={"min_strict_gap": worst}))
    else:
        out.append(Check("blowup.projection-lower-bound", INFO, 0, 0,
                         note=f"skipped: {space.n_nodes} nodes exceeds {max_nodes}"))
    return out


# ---------------------------------------------------------------- standard paths


@dataclass
class StandardPath:
    nodes: list
    length: float
    spaces: list
    bound: float
    broken: bool = False


def _segment(sp, a, b):
    step = 1 if b >= a else -1
    return [sp.node_index(k) for k in range(a, b + step, step)]


def _nearest(nodes, target):
    return min(nodes, key=lambda k: (abs(k - target), k))


def standard_path(space, system, params, x, z):
    """Route through the ordered K-large spaces between x and z.

    ``x`` and ``z`` are PointRefs.  Consecutive spaces in the order are
    joined by a bridge when they are adjacent in the complex; otherwise the
    path is marked broken and the gap is bridged by a shortest path.
    """
    gx, gz = space.index(x), space.index(z)
    X, Z = space.owner(gx), space.owner(gz)
    K = params.K
    bound = 6 * K + 4 * sum(v for _, v in point_large_set(space, gx, gz, K))
    if X == Z:
        nodes = _segment(space.spaces[X], x.node, z.node)
        return StandardPath(nodes, float(abs(x.node - z.node)), [system.vertices[X]], bound)
    order = order_interval(system, params, system.vertices[X], system.vertices[Z], K)
    idx = [system.ix(v) for v in order.elements]
    nodes = []
    length = 0.0
    broken = False
    current = x.node
    for i, a in enumerate(idx):
        sp = space.spaces[a]
        if i == len(idx) - 1:
            exit_node = z.node
        else:
            b = idx[i + 1]
            exit_node = _nearest(sp.anchors[b], current)
        nodes.extend(_segment(sp, current, exit_node))
        length += abs(exit_node - current)
        if i == len(idx) - 1:
            break
        nxt = space.spaces[b]
        target = z.node if i + 1 == len(idx) - 1 else np.mean(nxt.anchors[idx[i + 2]])
        entry = _nearest(nxt.anchors[a], target)
        if space.complex.adjacency[a, b]:
            length += space.L
        else:
            broken = True
            length += float(space.row(nodes[-1])[nxt.node_index(entry)])
        current = entry
    return StandardPath(nodes, length, [system.vertices[a] for a in idx], bound, broken)


# ---------------------------------------------------------------- distance formula


def distance_formula_bounds(space, system, params, x, z):
    """``(lower, actual, upper)`` for the two-sided distance estimate."""
    gx, gz = space.index(x), space.index(z)
    lower = 0.5 * sum(v for _, v in point_large_set(space, gx, gz, params.Kprime))
    upper = 6 * params.K + 4 * sum(v for _, v in point_large_set(space, gx, gz, params.K))
    actual = float(space.row(gx)[gz])
    return lower, actual, upper


def nearest_point_check(space, system, params, x, Z):
    """Closest node of C(Z) to ``x`` and its projection defect."""
    gx = space.index(x)
    iz = system.ix(Z)
    if space.owner(gx) == iz:
        raise ValueError("x already lies in C(Z)")
    sp = space.spaces[iz]
    r = space.row(gx)[sp.offset:sp.offset + sp.size]
    k = int(np.argmin(r))
    gz = sp.offset + k
    defect = point_dpi(space, iz, gx, gz)
    return {"z_nearest": PointRef(Z, sp.lo + k), "distance": float(r[k]), "projection_defect": defect}


# ---------------------------------------------------------------- geodesic traces


@dataclass
class Trace:
    visits: list  # (vertex id, entry node, exit node) along the traced path
    path: list
    length: float
    contiguous: bool
    missing: list
    out_of_order: bool
    max_entry_defect: float
    max_exit_defect: float
    required: list


def _dag(space, dx, dz, total):
    """Shortest-path DAG between two nodes as (on, successors, predecessors)."""
    on = np.flatnonzero(np.abs(dx + dz - total) <= TOL * max(1.0, total))
    on_set = set(on.tolist())
    g = space.graph
    succ = {}
    pred = {u: [] for u in on.tolist()}
    for u in on.tolist():
        start, end = g.indptr[u], g.indptr[u + 1]
        out = []
        for v, w in zip(g.indices[start:end], g.data[start:end]):
            v = int(v)
            if v in on_set and abs(dx[u] + w - dx[v]) <= TOL * max(1.0, total):
                out.append(v)
                pred[v].append(u)
        succ[u] = out
    return on, succ, pred


def _reach(succ, starts, blocked=frozenset()):
    seen = set()
    stack = [s for s in starts if s not in blocked]
    while stack:
        u = stack.pop()
        if u in seen:
            continue
        seen.add(u)
        stack.extend(v for v in succ.get(u, ()) if v not in seen and v not in blocked)
    return seen


def geodesic_trace(space, system, params, x, z, threshold=None):
    """Trace a geodesic from x to z and test the forced-visit properties.

    Contiguity, visits, order and endpoint defects are decided over every
    geodesic at once using the shortest-path DAG, not just the traced one.
    ``threshold`` defaults to Kprime.
    """
    threshold = params.Kprime if threshold is None else threshold
    gx, gz = space.index(x), space.index(z)
    dx, dz = space.row(gx), space.row(gz)
    total = float(dx[gz])
    on, succ, pred = _dag(space, dx, dz, total)
    owner = space._owner

    # one traced geodesic, smallest successor first
    path = [gx]
    while path[-1] != gz:
        path.append(min(succ[path[-1]]))
    visits = []
    for g in path:
        o = int(owner[g])
        if visits and visits[-1][0] == o:
            visits[-1][2] = space.coord(g)
        else:
            visits.append([o, space.coord(g), space.coord(g)])

    # contiguity: no DAG path leaves a space and comes back to it
    contiguous = True
    spaces_on = {int(owner[g]) for g in on.tolist()}
    for s in spaces_on:
        exits = [v for u in on.tolist() if owner[u] == s for v in succ[u] if owner[v] != s]
        if any(owner[v] == s for v in _reach(succ, exits)):
            contiguous = False
            break

    required = point_large_set(space, gx, gz, threshold)
    missing = []
    max_entry = max_exit = 0.0
    for iy, _ in required:
        nodes = {g for g in on.tolist() if owner[g] == iy}
        if gz in _reach(succ, [gx], blocked=frozenset(nodes)):
            missing.append(system.vertices[iy])
        for g in nodes:
            preds_out = g == gx or any(owner[u] != iy for u in pred[g])
            succ_out = g == gz or any(owner[v] != iy for v in succ[g])
            if preds_out:
                max_entry = max(max_entry, point_dpi(space, iy, gx, g))
            if succ_out:
                max_exit = max(max_exit, point_dpi(space, iy, gz, g))

    out_of_order = False
    X, Z = space.owner(gx), space.owner(gz)
    req = {iy for iy, _ in required}
    if len(req) > 1:
        try:
            if X == Z:
                raise OrderError("same space")
            order = order_interval(system, params, system.vertices[X], system.vertices[Z],
                                   max(params.theta, params.K))
            seq = [system.ix(v) for v in order.elements if system.ix(v) in req]
        except OrderError:
            seq = sorted(req, key=lambda iy: min(dx[g] for g in on.tolist() if owner[g] == iy)
                         if any(owner[g] == iy for g in on.tolist()) else math.inf)
        for a, b in zip(seq, seq[1:]):
            b_nodes = [g for g in on.tolist() if owner[g] == b]
            if any(owner[g] == a for g in _reach(succ, b_nodes)):
                out_of_order = True
                break

    names = system.vertices
    return Trace(
        visits=[(names[o], a, b) for o, a, b in visits],
        path=path,
        length=total,
        contiguous=contiguous,
        missing=missing,
        out_of_order=out_of_order,
        max_entry_defect=max_entry,
        max_exit_defect=max_exit,
        required=[names[iy] for iy, _ in required],
    )


def hausdorff_distance(space, path_a, path_b):
    """Symmetrized Hausdorff distance between two node sequences."""
    a = sorted(set(int(g) for g in path_a))
    b = sorted(set(int(g) for g in path_b))
    if not a or not b:
        raise ValueError("paths must be non-empty")
    R = space.rows(a)
    ab = float(R[:, b].min(axis=1).max())
    R = space.rows(b)
    ba = float(R[:, a].min(axis=1).max())
    return max(ab, ba)


# ---------------------------------------------------------------- hyperbolicity


def four_point_defect(d, x, y, z, w):
    s = sorted((d[x, y] + d[z, w], d[x, z] + d[y, w], d[x, w] + d[y, z]), reverse=True)
    return (s[0] - s[1]) / 2


def estimate_delta(space, sample_count=200, seed=0, node_sample=48, pair_count=20):
    """Four-point defect over sampled quadruples and bottleneck over sampled pairs."""
    rng = np.random.default_rng(seed)
    n = space.n_nodes
    m = min(n, node_sample)
    nodes = np.sort(rng.choice(n, size=m, replace=False))
    D = space.rows(nodes)[:, nodes]
    delta4 = 0.0
    if m >= 4:
        for _ in range(sample_count):
            q = rng.choice(m, size=4, replace=False)
            delta4 = max(delta4, four_point_defect(D, *q))
    indptr, indices = space.csr()

    def reach(blocked, a, b):
        return kernels.reachable(indptr, indices, blocked, a, b)

    bottleneck = 0.0
    witness = None
    pairs = 0
    cap = math.inf
    for _ in range(pair_count):
        a, b = (int(v) for v in rng.choice(nodes, size=2, replace=False))
        if b in indices[indptr[a]:indptr[a + 1]]:
            continue
        pairs += 1
        value, y = pair_bottleneck(reach, space.row, a, b, space.L, cap)
        if value > bottleneck:
            bottleneck, witness = value, (a, y, b)
    return {
        "delta_4pt": delta4,
        "bottleneck_delta": bottleneck,
        "bottleneck_witness": None if witness is None else [str(space.ref(witness[0])),
                                                            str(space.ref(witness[1])),
                                                            str(space.ref(witness[2]))],
        "seed": seed,
        "quadruples": sample_count if m >= 4 else 0,
        "pairs": pairs,
        "nodes": n,
    }


# ---------------------------------------------------------------- sweeps


def sample_pairs(space, count, seed):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        a, b = (int(v) for v in rng.integers(0, space.n_nodes, size=2))
        if a != b:
            out.append((a, b))
    return out


def check_blowup(space, system, params, pairs=200, seed=0, max_nodes=2000, trace_slack=None):
    """Sandwich, standard paths, nearest points and traces on sampled pairs."""
    xi = system.xi
    trace_slack = 10 * xi if trace_slack is None else trace_slack
    out = check_total_geodesy(space, max_nodes=max_nodes)
    sample = sample_pairs(space, pairs, seed)
    sand_bad = sp_bad = sp_broken = 0
    ratios = []
    np_max = 0.0
    contig_bad = missing_bad = order_bad = 0
    defect = 0.0
    examples = {}
    haus = 0.0
    for a, b in sample:
        x, z = space.ref(a), space.ref(b)
        lower, actual, upper = distance_formula_bounds(space, system, params, x, z)
        if not lower <= actual <= upper:
            sand_bad += 1
            examples.setdefault("sandwich", [str(x), str(z), lower, actual, upper])
        if actual > 0:
            ratios.append(upper / actual)
        spath = standard_path(space, system, params, x, z)
        if spath.broken:
            sp_broken += 1
        if not (actual - TOL <= spath.length <= spath.bound):
            sp_bad += 1
            examples.setdefault("standard", [str(x), str(z), spath.length, actual, spath.bound])
        tr = geodesic_trace(space, system, params, x, z)
        contig_bad += not tr.contiguous
        missing_bad += bool(tr.missing)
        order_bad += tr.out_of_order
        defect = max(defect, tr.max_entry_defect, tr.max_exit_defect)
        if not tr.contiguous or tr.missing or tr.out_of_order:
            examples.setdefault("trace", [str(x), str(z), tr.missing])
        haus = max(haus, hausdorff_distance(space, spath.nodes, tr.path))
        Z = space.owner(b)
        if space.owner(a) != Z:
            np_max = max(np_max, nearest_point_check(space, system, params, x,
                                                    system.vertices[Z])["projection_defect"])
    K, Kp = params.K, params.Kprime
    out += [
        Check("blowup.sandwich", status_from(sand_bad), len(sample), sand_bad,
              measured={"max_upper_ratio": max(ratios) if ratios else 0.0},
              example=examples.get("sandwich")),
        Check("blowup.standard-path", status_from(sp_bad), len(sample), sp_bad,
              measured={"broken_paths": sp_broken}, example=examples.get("standard")),
        Check("blowup.nearest-point", FLAG if np_max > 2 * K + 20 * xi else PASS, len(sample), 0,
              measured={"max_defect": np_max, "advisory": 2 * K + 20 * xi}),
        Check("blowup.trace-contiguity", status_from(contig_bad), len(sample), contig_bad),
        Check("blowup.trace-visits", status_from(missing_bad), len(sample), missing_bad,
              example=examples.get("trace")),
        Check("blowup.trace-order", status_from(order_bad), len(sample), order_bad),
        Check("blowup.trace-defects", FLAG if defect > Kp + trace_slack else PASS, len(sample), 0,
              measured={"max_defect": defect, "advisory": Kp + trace_slack}),
        Check("blowup.hausdorff", INFO, len(sample), 0, measured={"max_hausdorff": haus}),
    ]
    return out


def edge_list_csv(space):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["src", "dst", "weight", "kind"])
    names = space.system.vertices
    for a, b, wt in space.edge_list():
        kind = "internal" if space.owner(a) == space.owner(b) else "bridge"
        w.writerow([f"{names[space.owner(a)]}:{space.coord(a)}",
                    f"{names[space.owner(b)]}:{space.coord(b)}", repr(wt), kind])
    return buf.getvalue()
