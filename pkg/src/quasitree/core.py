"""Projection systems, modified distances, ordering, guards and barriers.

A system is a finite list of vertex ids, a constant ``xi`` and a dense table
``dpi[y, x, z]`` of projection distances.  Entries where ``y`` coincides with
``x`` or ``z`` are undefined and stored as NaN.  The diagonal ``dpi[y, x, x]``
holds the projection diameter of ``x`` seen from ``y``.

The modified distance replaces ``dpi[y, x, z]`` by the smallest value of
``dpi[y]`` over a family of pairs that "look like" ``(x, z)`` from both ends.
It is what makes monotonicity hold without exceptions, and everything
downstream (ordering, the complex, the blowup) is built on it.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from quasitree import kernels
from quasitree.report import FLAG, INFO, PASS, Check, status_from


EPS = float(np.finfo(float).eps)
# Stored distances are differences of rounded coordinates; a triangle that
# closes exactly in the reals may miss by a few units in the last place.
TRIANGLE_ULPS = 8


class OrderError(ValueError):
    """The comparator on a large-projection set is not a strict total order.

    Usually means K is too small for the system.  ``triple`` holds the
    offending vertices.
    """

    def __init__(self, message, triple=()):
        super().__init__(message)
        self.triple = tuple(triple)


class BarrierError(RuntimeError):
    """Guard chaining produced no barrier; K is too small."""


# ---------------------------------------------------------------- systems


class ProjectionSystem:
    """Finite family of objects with projection distances.

    ``dpi`` is an ``(n, n, n)`` array indexed ``[y, x, z]``.  Undefined
    entries (``y in {x, z}``) are overwritten with NaN.
    """

    def __init__(self, vertices, xi, dpi, name="system", meta=None):
        vertices = list(vertices)
        n = len(vertices)
        if n == 0:
            raise ValueError("a projection system needs at least one vertex")
        if not xi > 0 or not math.isfinite(xi):
            raise ValueError(f"xi must be a positive finite number, got {xi!r}")
        table = np.array(dpi, dtype=float)
        if table.shape != (n, n, n):
            raise ValueError(f"dpi table has shape {table.shape}, expected {(n, n, n)}")
        idx = np.arange(n)
        table[idx, idx, :] = np.nan
        table[idx, :, idx] = np.nan
        defined = table[~np.isnan(table)]
        if defined.size and (defined.min() < 0 or not np.isfinite(defined).all()):
            raise ValueError("projection distances must be finite and non-negative")
        table.flags.writeable = False
        self.vertices = vertices
        self.xi = float(xi)
        self.name = name
        self.meta = dict(meta or {})
        self._index = {v: i for i, v in enumerate(vertices)}
        if len(self._index) != n:
            raise ValueError("vertex ids must be distinct")
        self._dpi = table
        self._modified = None

    @property
    def n(self):
        return len(self.vertices)

    def __len__(self):
        return len(self.vertices)

    def ix(self, v):
        try:
            return self._index[v]
        except KeyError:
            raise ValueError(f"unknown vertex {v!r}") from None

    @property
    def dpi_table(self):
        return self._dpi

    @property
    def modified_table(self):
        """Table of modified distances, same layout as ``dpi_table``."""
        if self._modified is None:
            table = kernels.modified_table(self._dpi, self.xi)
            table.flags.writeable = False
            self._modified = table
        return self._modified

    def table(self, mode="modified"):
        if mode == "modified":
            return self.modified_table
        if mode == "raw":
            return self._dpi
        raise ValueError(f"unknown metric mode {mode!r}")

    def dpi(self, y, x, z):
        return self._lookup(self._dpi, y, x, z)

    def d(self, y, x, z):
        return self._lookup(self.modified_table, y, x, z)

    def _lookup(self, table, y, x, z):
        iy, ix, iz = self.ix(y), self.ix(x), self.ix(z)
        if iy in (ix, iz):
            raise ValueError(f"projection onto {y!r} of a pair containing it is undefined")
        return float(table[iy, ix, iz])

    def with_xi(self, xi):
        """Same table, different constant (modified distances are recomputed)."""
        return self.__class__._rebuild(self, xi)

    @staticmethod
    def _rebuild(system, xi):
        new = object.__new__(system.__class__)
        new.__dict__.update(system.__dict__)
        new.xi = float(xi)
        new._modified = None
        return new

    def digest(self):
        h = hashlib.sha256()
        h.update(json.dumps([str(v) for v in self.vertices]).encode())
        h.update(np.float64(self.xi).tobytes())
        h.update(np.nan_to_num(self._dpi, nan=-1.0).tobytes())
        return h.hexdigest()[:16]


class TabularSystem(ProjectionSystem):
    """Projection system given by an explicit table, typically hand-written."""

    @classmethod
    def from_entries(cls, vertices, xi, entries, name="table"):
        """Build from ``{(y, x, z): value}``; the ``(x, z)`` swap is filled in.

        Missing entries are 0.  Conflicting values for a pair and its swap
        raise ValueError.
        """
        vertices = list(vertices)
        n = len(vertices)
        index = {v: i for i, v in enumerate(vertices)}
        table = np.zeros((n, n, n))
        seen = {}
        for (y, x, z), value in entries.items():
            try:
                iy, ix, iz = index[y], index[x], index[z]
            except KeyError as exc:
                raise ValueError(f"entry names unknown vertex {exc.args[0]!r}") from None
            if iy in (ix, iz):
                raise ValueError(f"entry ({y}, {x}, {z}) projects a pair onto one of its members")
            key = (iy, min(ix, iz), max(ix, iz))
            value = float(value)
            if key in seen and seen[key] != value:
                raise ValueError(f"asymmetric entries for ({y}, {x}|{z}): {seen[key]} vs {value}")
            seen[key] = value
            table[iy, ix, iz] = table[iy, iz, ix] = value
        return cls(vertices, xi, table, name=name)

    @classmethod
    def from_dict(cls, data, name="table"):
        try:
            xi = float(data["xi"])
            vertices = [str(v) for v in data["vertices"]]
            rows = data["dpi"]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"tabular system needs xi, vertices and dpi: {exc}") from None
        entries = {}
        for y, row in rows.items():
            for key, value in row.items():
                x, sep, z = str(key).partition("|")
                if not sep:
                    raise ValueError(f"dpi key {key!r} is not of the form 'X|Z'")
                entries[(str(y), x, z)] = value
        return cls.from_entries(vertices, xi, entries, name=data.get("name", name))

    def to_dict(self):
        rows = {}
        for iy, y in enumerate(self.vertices):
            row = {}
            for ix, x in enumerate(self.vertices):
                for iz in range(ix, self.n):
                    v = self._dpi[iy, ix, iz]
                    if not np.isnan(v) and v != 0.0:
                        row[f"{x}|{self.vertices[iz]}"] = float(v)
            if row:
                rows[str(y)] = row
        return {"xi": self.xi, "vertices": [str(v) for v in self.vertices], "dpi": rows}


# ---------------------------------------------------------------- constants


@dataclass(frozen=True)
class CoreParams:
    """The constants used downstream of the axioms.

    ``theta`` is the enlarged constant at which the modified distances are
    monotone, ``K`` the complex threshold, ``Kprime`` the threshold above
    which a vertex must lie on every geodesic, and ``L`` the bridge length.
    """

    xi: float
    theta: float
    K: float
    Kprime: float
    L: float

    def __post_init__(self):
        if not self.theta >= 4 * self.xi:
            raise ValueError(f"theta={self.theta} is below 4*xi={4 * self.xi}")
        if not self.K >= self.theta:
            raise ValueError(f"K={self.K} is below theta={self.theta}")
        if not self.Kprime > self.K:
            raise ValueError(f"Kprime={self.Kprime} must exceed K={self.K}")
        if not self.L > self.K + 2 * self.xi:
            raise ValueError(f"L={self.L} must exceed K + 2*xi = {self.K + 2 * self.xi}")

    @classmethod
    def derive(cls, xi, theta=None, K=None, Kprime=None, L=None):
        """Fill unspecified constants from ``xi`` (and from each other)."""
        theta = 4.0 * xi if theta is None else float(theta)
        K = 30.0 * xi if K is None else float(K)
        Kprime = 5.0 * K + 30.0 * xi if Kprime is None else float(Kprime)
        L = K + 2.0 * xi + 1.0 if L is None else float(L)
        return cls(float(xi), theta, K, Kprime, L)

    def with_K(self, K, keep_Kprime=False, keep_L=False):
        return CoreParams.derive(
            self.xi,
            theta=self.theta,
            K=K,
            Kprime=self.Kprime if keep_Kprime else None,
            L=self.L if keep_L else None,
        )

    def to_dict(self):
        return {"xi": self.xi, "theta": self.theta, "K": self.K, "Kprime": self.Kprime, "L": self.L}


def _check_params(system, params):
    if params.xi != system.xi:
        raise ValueError(f"params.xi={params.xi} does not match the system's xi={system.xi}")


# ---------------------------------------------------------------- axioms


@dataclass
class AxiomReport:
    ok: bool
    minimal_valid_xi: float
    axiom0_bound: float
    violations: list = field(default_factory=list)
    counts: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)


def _first(mask):
    hit = np.argwhere(mask)
    return tuple(int(v) for v in hit[0]) if len(hit) else None


def validate_axioms(system, max_examples=20):
    """Check symmetry, triangle inequality and the Behrstock inequality.

    Symmetry and the triangle inequality are checked exactly, Behrstock
    strictly below ``system.xi``.  ``minimal_valid_xi`` is the smallest
    constant for which the Behrstock check would pass; ``axiom0_bound`` the
    largest projection diameter (diagonal entry).
    """
    n = system.n
    D = system.dpi_table
    names = system.vertices
    violations = []
    counts = {}

    def note(kind, where, values):
        if len(violations) < max_examples:
            violations.append({"axiom": kind, "vertices": [names[i] for i in where], "values": values})

    with np.errstate(invalid="ignore"):
        asym = D != np.swapaxes(D, 1, 2)
        asym &= ~np.isnan(D)
        counts["symmetry"] = int(asym.sum()) // 2
        if counts["symmetry"]:
            y, x, z = _first(asym)
            note("symmetry", (y, x, z), [float(D[y, x, z]), float(D[y, z, x])])

        tri = 0
        tri_excess = 0.0
        for y in range(n):
            keep = np.arange(n) != y
            M = D[y][np.ix_(keep, keep)]
            # bad[x, z, w]: M[x, w] > M[x, z] + M[z, w], beyond the rounding of
            # the three stored differences and the sum
            excess = M[:, None, :] - (M[:, :, None] + M[None, :, :])
            bad = excess > TRIANGLE_ULPS * EPS * np.abs(M[:, None, :])
            tri_excess = max(tri_excess, float(np.nanmax(excess, initial=0.0)))
            c = int(bad.sum())
            if c:
                tri += c
                xs = np.flatnonzero(keep)
                x, z, w = _first(bad)
                note("triangle", (y, xs[x], xs[z], xs[w]),
                     [float(M[x, w]), float(M[x, z]), float(M[z, w])])
        counts["triangle"] = tri

        # Behrstock: min(D[y, x, z], D[z, x, y]) over distinct triples
        both = np.fmin(D, np.transpose(D, (2, 1, 0)))
        idx = np.arange(n)
        both[:, idx, idx] = np.nan
        mins = both[~np.isnan(both)]
        worst = float(mins.max()) if mins.size else 0.0
        beh = both >= system.xi
        counts["behrstock"] = int(beh.sum()) // 2
        if counts["behrstock"]:
            y, x, z = _first(beh)
            note("behrstock", (y, x, z), [float(D[y, x, z]), float(D[z, x, y])])

    diag = D[:, idx, idx]
    diag = diag[~np.isnan(diag)]
    axiom0 = float(diag.max()) if diag.size else 0.0
    minimal = float(np.nextafter(worst, np.inf))

    checks = [
        Check("axiom.symmetry", status_from(counts["symmetry"]), n ** 3, counts["symmetry"]),
        Check("axiom.triangle", status_from(counts["triangle"]), n ** 4, counts["triangle"],
              measured={"max_excess": tri_excess, "rounding_ulps": TRIANGLE_ULPS}),
        Check("axiom.behrstock", status_from(counts["behrstock"]), n ** 3, counts["behrstock"],
              measured={"xi": system.xi, "minimal_valid_xi": minimal}),
        Check("axiom.finiteness", PASS, 0, 0, note="finite system"),
        Check("axiom.projection-diameter", status_from(axiom0 >= system.xi), n * n,
              int(axiom0 >= system.xi), measured={"max_diameter": axiom0}),
    ]
    ok = not any(c.failed for c in checks)
    return AxiomReport(ok, minimal, axiom0, violations, counts, checks)


# ---------------------------------------------------------------- H(X, Z)


@dataclass(frozen=True)
class HSet:
    pair: tuple
    members: frozenset


def h_set(system, X, Z):
    """All ordered pairs that stand in for ``(X, Z)`` in the modified distance."""
    ix, iz = system.ix(X), system.ix(Z)
    if ix == iz:
        raise ValueError("h_set needs two distinct vertices")
    D = system.dpi_table
    two = 2 * system.xi
    with np.errstate(invalid="ignore"):
        big = D > two
    mask = big[ix] & big[iz]
    mask[ix, :] |= big[iz, ix, :]
    mask[:, iz] |= big[ix, :, iz]
    mask[ix, iz] = True
    v = system.vertices
    members = frozenset((v[a], v[b]) for a, b in zip(*np.nonzero(mask)))
    return HSet((X, Z), members)


def modified_distance(system, Y, X, Z):
    """Modified distance from the cached table; see ``h_set`` for the definition."""
    if X == Z:
        raise ValueError("modified_distance needs X != Z")
    return system.d(Y, X, Z)


def large_set(system, params, X, Z, threshold, mode="modified"):
    """Indices of vertices ``Y`` outside ``{X, Z}`` with ``d_Y(X, Z) > threshold``."""
    ix, iz = system.ix(X), system.ix(Z)
    if ix == iz:
        raise ValueError("large_set needs two distinct vertices")
    if mode == "modified" and threshold < params.theta:
        raise ValueError(f"threshold {threshold} is below theta={params.theta}")
    col = system.table(mode)[:, ix, iz]
    with np.errstate(invalid="ignore"):
        return [system.vertices[i] for i in np.flatnonzero(col > threshold)]


def _large_indices(table, ix, iz, threshold):
    with np.errstate(invalid="ignore"):
        return np.flatnonzero(table[:, ix, iz] > threshold)


# ---------------------------------------------------------------- order


@dataclass(frozen=True)
class OrderedInterval:
    pair: tuple
    threshold: float
    elements: tuple

    @property
    def interior(self):
        return self.elements[1:-1]

    def index(self, v):
        return self.elements.index(v)

    def __len__(self):
        return len(self.elements)


def _sort_indices(d, xi, ix, iz, members):
    """Sort ``members`` by ``a < b  <=>  d[a, ix, b] > xi`` and verify it.

    Returns the sorted list.  Raises OrderError on a tie, a double
    relation or a cycle.
    """
    members = list(members)
    m = len(members)
    if m == 0:
        return []
    mem = np.asarray(members)
    with np.errstate(invalid="ignore"):
        less = d[mem[:, None], ix, mem[None, :]] > xi  # less[i, j]: mem[i] < mem[j]
    np.fill_diagonal(less, False)
    both = less & less.T
    if both.any():
        i, j = _first(both)
        raise OrderError("comparator holds in both directions", (ix, members[i], members[j]))
    off = ~np.eye(m, dtype=bool)
    tie = off & ~less & ~less.T
    if tie.any():
        i, j = _first(tie)
        raise OrderError("comparator tie", (ix, members[i], members[j]))
    # a tournament is transitive iff its out-degrees are 0..m-1
    rank = less.sum(axis=0)  # number of members below each one
    if sorted(rank.tolist()) != list(range(m)):
        # find a 3-cycle for the diagnostic
        for i, j, k in combinations(range(m), 3):
            for a, b, c in ((i, j, k), (i, k, j)):
                if less[a, b] and less[b, c] and less[c, a]:
                    raise OrderError("comparator has a cycle", (members[a], members[b], members[c]))
        raise OrderError("comparator is not transitive", ())
    return [members[i] for i in np.argsort(rank, kind="stable")]


def order_interval(system, params, X, Z, K, mode="modified"):
    """Large-projection set between X and Z, sorted from X to Z."""
    _check_params(system, params)
    if K < params.theta:
        raise ValueError(f"K={K} is below theta={params.theta}")
    ix, iz = system.ix(X), system.ix(Z)
    if ix == iz:
        raise ValueError("order_interval needs X != Z")
    d = system.table(mode)
    members = _large_indices(d, ix, iz, K)
    try:
        ordered = _sort_indices(d, system.xi, ix, iz, members)
    except OrderError as exc:
        names = tuple(system.vertices[i] for i in exc.triple)
        raise OrderError(f"{exc.args[0]} between {X!r} and {Z!r} at K={K}: "
                         "K too small or system degenerate", names) from None
    v = system.vertices
    return OrderedInterval((X, Z), float(K), (X, *(v[i] for i in ordered), Z))


# ---------------------------------------------------------------- guards, barriers


def is_guard(system, params, W, Y, K):
    """Exhaustive guard test of ``W`` for ``Y``.

    For every X with W in the theta-large set between X and Y, all members
    of the K-large set between X and Y must come no later than W.
    """
    _check_params(system, params)
    iw, iy = system.ix(W), system.ix(Y)
    if iw == iy:
        raise ValueError("a vertex is not a guard for itself")
    d = system.modified_table
    with np.errstate(invalid="ignore"):
        xs = np.flatnonzero(d[iw, :, iy] > params.theta)
        xs = xs[(xs != iw) & (xs != iy)]
        if xs.size == 0:
            return True
        late = (d[:, xs, iy] > K).T  # late[x, z]: Z in the K-large set for (X, Y)
        before = (d[:, xs, iw] > system.xi).T  # Z < W in the order for (X, Y)
    late[:, iw] = False
    return not bool((late & ~before).any())


def is_barrier(system, params, Y, path, Z):
    """True when ``Y`` has theta-large projection between every path vertex and ``Z``."""
    if Z in path:
        raise ValueError("the target must not lie on the path")
    iy, iz = system.ix(Y), system.ix(Z)
    if iy == iz:
        return False
    d = system.modified_table
    for X in path:
        ix = system.ix(X)
        if ix == iy or not d[iy, ix, iz] > params.theta:
            return False
    return True


def _greatest(d, xi, ix, iz, members):
    ordered = _sort_indices(d, xi, ix, iz, members)
    return ordered[-1] if ordered else None


def find_barrier(system, params, complex_, path, Z, return_chain=False):
    """Barrier between ``path`` and ``Z`` by chaining guards along the path.

    Starts from the greatest element of the (K/2)-large set between the first
    path vertex and ``Z``; each time the current guard drops out of the next
    vertex's large set it is replaced by the greatest element of that set
    below it.
    """
    _check_params(system, params)
    path = list(path)
    if not path:
        raise ValueError("path must contain at least one vertex")
    iz = system.ix(Z)
    for X in path:
        if complex_.distance(X, Z) < 3:
            raise ValueError(f"path vertex {X!r} is within distance 2 of {Z!r}")
    d = system.modified_table
    xi = system.xi
    half = params.K / 2
    ip = [system.ix(X) for X in path]
    try:
        w = _greatest(d, xi, ip[0], iz, _large_indices(d, ip[0], iz, half))
    except OrderError as exc:
        raise BarrierError(f"K too small: {exc}") from None
    if w is None:
        raise BarrierError(f"K too small: no large projections between {path[0]!r} and {Z!r}")
    chain = [w]
    for ix in ip[1:]:
        members = _large_indices(d, ix, iz, half)
        if w in members:
            chain.append(w)
            continue
        below = [m for m in members if m != w and d[m, ix, w] > xi]
        try:
            w = _greatest(d, xi, ix, iz, below)
        except OrderError as exc:
            raise BarrierError(f"K too small: {exc}") from None
        if w is None:
            raise BarrierError(f"K too small: guard chain broke at {system.vertices[ix]!r}")
        chain.append(w)
    names = [system.vertices[i] for i in chain]
    for cand in dict.fromkeys(names):
        if is_barrier(system, params, cand, path, Z):
            return (cand, names) if return_chain else cand
    raise BarrierError(f"K too small: no guard in the chain {names} is a barrier")


# ---------------------------------------------------------------- the main property sweep


def _offdiag_triples(n):
    idx = np.arange(n)
    valid = np.ones((n, n, n), dtype=bool)
    valid[idx, idx, :] = False
    valid[idx, :, idx] = False
    valid[:, idx, idx] = False
    return valid


def check_theorem_main(system, params, mode="modified", order_pairs=True):
    """Exhaustive sweep of the properties of the modified distance.

    Returns a list of Check entries.  Hard properties fail on any exception;
    coarse constants are measured and flagged against advisory bounds.
    """
    _check_params(system, params)
    n = system.n
    xi, theta = system.xi, params.theta
    D = system.dpi_table
    d = system.table(mode)
    valid = _offdiag_triples(n)
    out = []
    prefix = "d" if mode == "modified" else "raw"

    with np.errstate(invalid="ignore"):
        asym = valid & (d != np.swapaxes(d, 1, 2))
        out.append(Check(f"{prefix}.symmetry", status_from(int(asym.sum())), int(valid.sum()),
                         int(asym.sum()), example=_names(system, _first(asym))))

        gap = D - d
        gap_v = gap[valid]
        bad = valid & ~((gap >= 0) & (gap < 2 * xi))
        out.append(Check(f"{prefix}.quasi-equal", status_from(int(bad.sum())), int(valid.sum()),
                         int(bad.sum()),
                         measured={"max_gap": float(gap_v.max()) if gap_v.size else 0.0,
                                   "min_gap": float(gap_v.min()) if gap_v.size else 0.0,
                                   "bound": 2 * xi},
                         example=_names(system, _first(bad))))

        # coarse triangle: d[y, x, w] <= d[y, x, z] + d[y, z, w] + slack
        worst = -np.inf
        checked = 0
        for y in range(n):
            keep = np.flatnonzero(np.arange(n) != y)
            M = d[y][np.ix_(keep, keep)]
            excess = M[:, None, :] - M[:, :, None] - M[None, :, :]
            finite = excess[~np.isnan(excess)]
            checked += finite.size
            if finite.size:
                worst = max(worst, float(finite.max()))
        worst = max(worst, 0.0)
        out.append(Check(f"{prefix}.coarse-triangle", FLAG if worst > 4 * xi else PASS, checked,
                         0, measured={"max_excess": worst, "advisory_bound": 4 * xi}))

        both = np.fmin(d, np.transpose(d, (2, 1, 0)))
        beh = valid & (both >= xi)
        out.append(Check(f"{prefix}.behrstock", status_from(int(beh.sum())), int(valid.sum()),
                         int(beh.sum()),
                         measured={"max_min": float(np.nanmax(np.where(valid, both, np.nan)))
                                   if valid.any() else 0.0},
                         example=_names(system, _first(beh))))

        counts = (d >= theta).sum(axis=0)
        out.append(Check(f"{prefix}.finiteness", INFO, n * n, 0,
                         measured={"max_large_count": int(counts.max()) if n else 0}))

    checked, violations, example = kernels.monotonicity_violations(d, theta)
    out.append(Check(f"{prefix}.monotonicity", status_from(violations), checked, violations,
                     measured={"theta": theta},
                     example=_names(system, example)))

    if order_pairs:
        out.append(_check_order_properties(system, params, d, prefix))
    out.append(_check_barrier_property(system, d, theta, valid, prefix))
    return out


def _names(system, idx):
    if idx is None:
        return None
    return [system.vertices[i] for i in idx]


def _check_order_properties(system, params, d, prefix):
    n, xi, theta = system.n, system.xi, params.theta
    inconsistent = 0
    not_reversed = 0
    hard = 0
    checked = 0
    slack_between = 0.0
    slack_outside = 0.0
    example = None
    orders = {}
    for ix in range(n):
        for iz in range(n):
            if ix == iz:
                continue
            members = _large_indices(d, ix, iz, theta)
            try:
                inner = _sort_indices(d, xi, ix, iz, members)
            except OrderError:
                inconsistent += 1
                continue
            orders[(ix, iz)] = inner
            seq = np.array([ix, *inner, iz])
            m = len(seq)
            if m < 3:
                continue
            i, j, k = np.meshgrid(np.arange(m), np.arange(m), np.arange(m), indexing="ij")
            distinct = (i != j) & (j != k) & (i != k)
            between = distinct & (i < j) & (j < k)
            outside = distinct & ~((i < j) & (j < k)) & ~((k < j) & (j < i))
            y0, y1, y2 = seq[i], seq[j], seq[k]
            vals = d[y1, y0, y2]
            ref = d[y1, ix, iz]
            if between.any():
                checked += int(between.sum())
                with np.errstate(invalid="ignore"):
                    over = between & (vals > ref)
                hard += int(over.sum())
                if over.any() and example is None:
                    a = tuple(int(t) for t in np.argwhere(over)[0])
                    example = [system.vertices[seq[t]] for t in a]
                slack_between = max(slack_between, float(np.nanmax((ref - vals)[between])))
            # outside only makes sense where y1 differs from y0, y2 (distinct)
            if outside.any():
                slack_outside = max(slack_outside, float(np.nanmax(vals[outside])))
    for (ix, iz), inner in orders.items():
        rev = orders.get((iz, ix))
        if rev is not None and rev != inner[::-1]:
            not_reversed += 1
    flagged = (inconsistent or not_reversed or slack_between > 10 * xi
               or slack_outside > 4 * xi)
    return Check(f"{prefix}.order", status_from(hard, flagged), checked, hard,
                 measured={"inconsistent_pairs": inconsistent,
                           "non_reversed_pairs": not_reversed,
                           "between_slack": slack_between,
                           "between_advisory": 10 * xi,
                           "outside_slack": slack_outside,
                           "outside_advisory": 4 * xi},
                 example=example)


def _check_barrier_property(system, d, theta, valid, prefix):
    n = system.n
    checked = 0
    bad = 0
    example = None
    with np.errstate(invalid="ignore"):
        for z in range(n):
            B = (d[:, :, z] > theta).astype(np.int64)  # B[y, x]
            common = (B.T @ B) > 0  # common[x0, x1]
            mask = common & valid[z]
            checked += int(mask.sum())
            hit = mask & ~(d[z] < theta)
            c = int(hit.sum())
            if c:
                bad += c
                if example is None:
                    x0, x1 = _first(hit)
                    example = [system.vertices[t] for t in (x0, z, x1)]
    return Check(f"{prefix}.barrier", status_from(bad), checked, bad,
                 measured={"theta": theta}, example=example)


# ---------------------------------------------------------------- K calibration


def order_consistent(system, K, mode="modified"):
    """True when every K-large set is strictly totally ordered."""
    d = system.table(mode)
    n = system.n
    for ix in range(n):
        for iz in range(n):
            if ix == iz:
                continue
            try:
                _sort_indices(d, system.xi, ix, iz, _large_indices(d, ix, iz, K))
            except OrderError:
                return False
    return True


def auto_K(system, params, max_doublings=16):
    """Double K until the orders at K and at K/2 (when usable) are consistent.

    Returns ``(params, history)`` where history lists ``(K, ok)`` per attempt.
    Kprime and L are re-derived from the accepted K.
    """
    _check_params(system, params)
    K = params.K
    history = []
    for _ in range(max_doublings + 1):
        ok = order_consistent(system, K)
        if ok and K / 2 >= params.theta:
            ok = order_consistent(system, K / 2)
        history.append((K, ok))
        if ok:
            return params.with_K(K), history
        K *= 2
    raise OrderError(f"no consistent K found up to {K / 2}")


__all__ = [
    "AxiomReport", "BarrierError", "CoreParams", "HSet", "OrderError", "OrderedInterval",
    "ProjectionSystem", "TabularSystem", "auto_K", "check_theorem_main", "find_barrier",
    "h_set", "is_barrier", "is_guard", "large_set", "modified_distance", "order_consistent",
    "order_interval", "validate_axioms",
]
