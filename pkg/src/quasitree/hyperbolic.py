"""Upper half-plane geometry and geodesic projection systems.

Geodesics are stored by their two ideal endpoints.  The nearest-point
projection of one geodesic onto another is an interval of arclength
coordinates, computed in closed form from the endpoints: the map
``T(z) = (z - a) / (z - b)`` sends the oriented geodesic ``(a, b)`` to the
positive imaginary axis and a boundary point ``t`` projects to coordinate
``ln |T(t)|``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from quasitree.core import ProjectionSystem, validate_axioms

BOUNDARY_TOL = 1e-9
TRACE_TOL = 1e-9
KEY_DIGITS = 7
XI_MARGIN = 1.1
XI_FLOOR = 1e-6


class NoAxisError(ValueError):
    """The isometry is elliptic or parabolic."""


class AsymptoticError(ValueError):
    """A boundary point coincides with an endpoint, so its projection is unbounded."""


class DegenerateConfigurationError(ValueError):
    """Two distinct geodesics in a family share an endpoint."""


# ---------------------------------------------------------------- points


@dataclass(frozen=True)
class BoundaryPoint:
    """Point of the real line or the point at infinity (``value is None``)."""

    value: float | None

    def __post_init__(self):
        if self.value is not None:
            v = float(self.value)
            if not math.isfinite(v):
                raise ValueError("use BoundaryPoint.infinity() for the point at infinity")
            object.__setattr__(self, "value", v)

    @classmethod
    def infinity(cls):
        return cls(None)

    @property
    def is_infinite(self):
        return self.value is None

    def close_to(self, other, tol=BOUNDARY_TOL):
        if self.is_infinite or other.is_infinite:
            return self.is_infinite and other.is_infinite
        s, t = self.value, other.value
        return abs(s - t) <= tol * max(1.0, abs(s), abs(t))

    def key(self):
        return "inf" if self.is_infinite else round(self.value, KEY_DIGITS) + 0.0

    def __repr__(self):
        return "BoundaryPoint(inf)" if self.is_infinite else f"BoundaryPoint({self.value!r})"


INF = BoundaryPoint.infinity()


def bp(t):
    """Coerce a float, ``math.inf`` or BoundaryPoint to a BoundaryPoint."""
    if isinstance(t, BoundaryPoint):
        return t
    if t is None or (isinstance(t, float) and math.isinf(t)):
        return INF
    return BoundaryPoint(t)


@dataclass(frozen=True)
class HPoint:
    x: float
    y: float

    def __post_init__(self):
        if not (self.y > 0 and math.isfinite(self.y) and math.isfinite(self.x)):
            raise ValueError(f"point ({self.x}, {self.y}) is not in the upper half-plane")

    @property
    def z(self):
        return complex(self.x, self.y)


def hyp_distance(p, q):
    dx, dy = p.x - q.x, p.y - q.y
    return 2.0 * math.asinh(math.hypot(dx, dy) / (2.0 * math.sqrt(p.y * q.y)))


@dataclass(frozen=True)
class Geodesic:
    """Bi-infinite geodesic oriented from ``a`` to ``b``."""

    a: BoundaryPoint
    b: BoundaryPoint

    def __post_init__(self):
        object.__setattr__(self, "a", bp(self.a))
        object.__setattr__(self, "b", bp(self.b))
        if self.a.close_to(self.b):
            raise ValueError("geodesic endpoints coincide")

    def reversed(self):
        return Geodesic(self.b, self.a)

    def key(self):
        """Orientation-free identity, quantized so translates by stabilizers collide."""
        ka, kb = self.a.key(), self.b.key()
        return tuple(sorted((ka, kb), key=lambda k: (k == "inf", k if k != "inf" else 0.0)))

    def endpoints(self):
        return (self.a, self.b)

    def shares_endpoint(self, other):
        return any(p.close_to(q) for p in self.endpoints() for q in other.endpoints())


# ---------------------------------------------------------------- isometries


@dataclass(frozen=True)
class MoebiusMap:
    """Orientation-preserving isometry ``z -> (m11 z + m12) / (m21 z + m22)``, det 1."""

    m11: float
    m12: float
    m21: float
    m22: float

    def __post_init__(self):
        det = self.m11 * self.m22 - self.m12 * self.m21
        if not det > 0:
            raise ValueError(f"matrix has non-positive determinant {det}")
        s = math.sqrt(det)
        for name in ("m11", "m12", "m21", "m22"):
            object.__setattr__(self, name, float(getattr(self, name)) / s)

    @classmethod
    def from_matrix(cls, m):
        m = np.asarray(m, dtype=float)
        if m.shape != (2, 2):
            raise ValueError("expected a 2x2 matrix")
        return cls(m[0, 0], m[0, 1], m[1, 0], m[1, 1])

    @classmethod
    def identity(cls):
        return cls(1.0, 0.0, 0.0, 1.0)

    @property
    def matrix(self):
        return np.array([[self.m11, self.m12], [self.m21, self.m22]])

    @property
    def trace(self):
        return self.m11 + self.m22

    def __matmul__(self, other):
        return MoebiusMap.from_matrix(self.matrix @ other.matrix)

    def inverse(self):
        return MoebiusMap(self.m22, -self.m12, -self.m21, self.m11)

    def __call__(self, p):
        return apply_moebius(self, p)


def apply_moebius(m, p):
    """Image of an HPoint, BoundaryPoint or Geodesic."""
    if isinstance(p, Geodesic):
        return Geodesic(apply_moebius(m, p.a), apply_moebius(m, p.b))
    if isinstance(p, HPoint):
        w = (m.m11 * p.z + m.m12) / (m.m21 * p.z + m.m22)
        return HPoint(w.real, w.imag)
    p = bp(p)
    if p.is_infinite:
        return INF if m.m21 == 0 else BoundaryPoint(m.m11 / m.m21)
    den = m.m21 * p.value + m.m22
    if den == 0:
        return INF
    return BoundaryPoint((m.m11 * p.value + m.m12) / den)


def axis_of(m):
    """Axis (repelling to attracting fixed point) and translation length."""
    tr = abs(m.trace)
    if tr <= 2.0 + TRACE_TOL:
        raise NoAxisError(f"no axis: |trace| = {tr} is not above 2")
    lam = (tr + math.sqrt(tr * tr - 4.0)) / 2.0
    length = 2.0 * math.log(lam)
    a, b, c, d = m.m11, m.m12, m.m21, m.m22
    if c == 0:
        fixed = [INF, BoundaryPoint(b / (d - a))]
    else:
        disc = math.sqrt((d - a) ** 2 + 4.0 * b * c)
        # roots of c z^2 + (d - a) z - b, in the cancellation-free form
        q = -0.5 * ((d - a) + math.copysign(disc, d - a if d != a else 1.0))
        fixed = [BoundaryPoint(q / c), BoundaryPoint(-b / q)]

    def multiplier(p):
        # |derivative| at a fixed point; above 1 means repelling
        if p.is_infinite:
            return abs(d / a)
        return 1.0 / (c * p.value + d) ** 2

    fixed.sort(key=lambda p: -multiplier(p))
    return Geodesic(fixed[0], fixed[1]), length


# ---------------------------------------------------------------- projections


def boundary_projection_coordinate(Y, t):
    """Arclength coordinate on ``Y`` of the foot of the perpendicular from ``t``."""
    t = bp(t)
    a, b = Y.a, Y.b
    if t.close_to(a) or t.close_to(b):
        raise AsymptoticError("asymptotic, unbounded projection")
    if t.is_infinite:
        return 0.0
    if b.is_infinite:
        return math.log(abs(t.value - a.value))
    if a.is_infinite:
        return -math.log(abs(t.value - b.value))
    return math.log(abs((t.value - a.value) / (t.value - b.value)))


def point_at(Y, u):
    """Point of ``Y`` with coordinate ``u``."""
    w = 1j * math.exp(u)
    a, b = Y.a, Y.b
    if b.is_infinite:
        z = w + a.value
    elif a.is_infinite:
        z = b.value + 1.0 / w
    else:
        z = (b.value * w - a.value) / (w - 1.0)
    return HPoint(z.real, z.imag)


def projection_interval(Y, X):
    if X.shares_endpoint(Y):
        raise AsymptoticError("parallel/asymptotic geodesics have unbounded projection")
    u = boundary_projection_coordinate(Y, X.a)
    v = boundary_projection_coordinate(Y, X.b)
    return (min(u, v), max(u, v))


def dpi_geodesics(Y, X, Z):
    """Diameter of the projection of ``X`` and ``Z`` onto ``Y``."""
    lo1, hi1 = projection_interval(Y, X)
    lo2, hi2 = projection_interval(Y, Z)
    return max(hi1, hi2) - min(lo1, lo2)


# ---------------------------------------------------------------- words


def letters(k):
    """Generator letters and their inverses: a/A, b/B, ..."""
    if not 1 <= k <= 26:
        raise ValueError("between 1 and 26 generators are supported")
    low = [chr(ord("a") + i) for i in range(k)]
    return low, [c.upper() for c in low]


def reduced_words(k, radius):
    """Reduced words of length <= radius in shortlex order."""
    low, up = letters(k)
    alphabet = [c for pair in zip(low, up) for c in pair]
    inverse = {**dict(zip(low, up)), **dict(zip(up, low))}
    out = [""]
    frontier = [""]
    for _ in range(radius):
        frontier = [w + c for w in frontier for c in alphabet if not (w and inverse[c] == w[-1])]
        out.extend(frontier)
    return out


def invert_word(word):
    return word[::-1].swapcase()


def reduce_word(word):
    out = []
    for c in word:
        if out and out[-1] == c.swapcase():
            out.pop()
        else:
            out.append(c)
    return "".join(out)


def orbit_words(word, forward, backward=None):
    """Prefixes of ``word**forward`` and of ``word**-backward``, shortest first.

    Enumerating an instance from these words keeps the orbit of ``word``
    in the window without the exponential growth of a full word ball.
    """
    word = reduce_word(word)
    backward = forward if backward is None else backward
    fwd = reduce_word(word * forward)
    bwd = reduce_word(invert_word(word) * backward)
    out = [""]
    for k in range(1, max(len(fwd), len(bwd)) + 1):
        out.extend(w[:k] for w in (fwd, bwd) if k <= len(w))
    return out


def word_matrix(generators, word):
    low, up = letters(len(generators))
    table = {**dict(zip(low, generators)), **dict(zip(up, (g.inverse() for g in generators)))}
    m = np.eye(2)
    for c in word:
        m = m @ table[c].matrix
    return MoebiusMap.from_matrix(m)


# ---------------------------------------------------------------- ping-pong


def _angle(p):
    return math.pi if p.is_infinite else 2.0 * math.atan(p.value)


def ping_pong_arcs(generators):
    """Boundary arcs for a ping-pong check, two per generator.

    For ``c != 0`` these are the isometric circles of ``g`` and ``g^-1``.
    A generator fixing infinity with fixed point ``p`` and multiplier
    ``lam^2`` gets ``|z - p| <= 1/lam`` and ``|z - p| >= lam``.
    Arcs are ``(start, end)`` angles on the circle ``2 atan(t)``, traversed
    counterclockwise.
    """
    arcs = []
    for g in generators:
        if abs(g.trace) <= 2.0 + TRACE_TOL:
            raise NoAxisError("ping-pong needs loxodromic generators")
        if g.m21 != 0:
            r = 1.0 / abs(g.m21)
            for centre in (-g.m22 / g.m21, g.m11 / g.m21):
                arcs.append((_angle(BoundaryPoint(centre - r)), _angle(BoundaryPoint(centre + r))))
        else:
            lam = math.sqrt(abs(g.m11 / g.m22))
            p = g.m12 / (g.m22 - g.m11)
            arcs.append((_angle(BoundaryPoint(p - 1 / lam)), _angle(BoundaryPoint(p + 1 / lam))))
            arcs.append((_angle(BoundaryPoint(p + lam)), _angle(BoundaryPoint(p - lam)) + 2 * math.pi))
    return arcs


def _inside(theta, arc):
    s, e = arc
    theta = s + (theta - s) % (2 * math.pi)
    return theta <= e


def ping_pong_ok(generators):
    """True when all ping-pong arcs are pairwise disjoint."""
    arcs = ping_pong_arcs(generators)
    for p, q in combinations(arcs, 2):
        if _inside(p[0], q) or _inside(q[0], p):
            return False
    return True


# ---------------------------------------------------------------- systems


DEFAULT_GENERATORS = (
    MoebiusMap(4.0, 0.0, 0.0, 0.25),
    MoebiusMap(17 / 8, 15 / 8, 15 / 8, 17 / 8),
)


class GeodesicSystem(ProjectionSystem):
    """Projection system whose vertices are geodesics in the upper half-plane.

    ``coords[y, x]`` holds the coordinates on geodesic ``y`` of the two
    endpoints of geodesic ``x`` (NaN on the diagonal).
    """

    def __init__(self, vertices, geodesics, xi=None, name="geodesics", meta=None,
                 generators=(), labels=None, bases=()):
        geodesics = list(geodesics)
        coords = endpoint_coordinates(geodesics)
        dpi = dpi_from_coordinates(coords)
        meta = dict(meta or {})
        meta["nu"] = _nu(dpi)
        if xi is None:
            xi, measured = measured_xi(vertices, dpi)
            meta.update(measured)
        super().__init__(vertices, xi, dpi, name=name, meta=meta)
        self.geodesics = geodesics
        self.coords = coords
        self.coords.flags.writeable = False
        self.generators = tuple(generators)
        # id -> (word, base index): the vertex is word applied to bases[index]
        self.labels = dict(labels or {})
        self.bases = tuple(bases)
        self._by_key = {g.key(): i for i, g in enumerate(geodesics)}

    def locate(self, geodesic):
        """Index of the vertex with the same (quantized) endpoints, or None."""
        return self._by_key.get(geodesic.key())

    def interval(self, iy, ix):
        """Projection interval of vertex ``ix`` on vertex ``iy``, by index."""
        lo, hi = sorted(self.coords[iy, ix])
        return float(lo), float(hi)


def endpoint_coordinates(geodesics):
    n = len(geodesics)
    C = np.full((n, n, 2), np.nan)
    for i, Y in enumerate(geodesics):
        for j, X in enumerate(geodesics):
            if i == j:
                continue
            if X.shares_endpoint(Y):
                raise DegenerateConfigurationError(
                    f"non-discrete or degenerate configuration: geodesics {j} and {i} share an endpoint")
            C[i, j, 0] = boundary_projection_coordinate(Y, X.a)
            C[i, j, 1] = boundary_projection_coordinate(Y, X.b)
    return C


def dpi_from_coordinates(C):
    """Span of the four endpoint coordinates, for every ``(y, x, z)``."""
    hi = np.max(C, axis=2)
    lo = np.min(C, axis=2)
    return np.maximum(hi[:, :, None], hi[:, None, :]) - np.minimum(lo[:, :, None], lo[:, None, :])


def _nu(dpi):
    n = dpi.shape[0]
    idx = np.arange(n)
    diag = dpi[:, idx, idx].copy()
    diag[idx, idx] = np.nan
    return float(np.nanmax(diag)) if n > 1 else 0.0


def measured_xi(vertices, dpi):
    """Smallest constant passing the Behrstock and diameter checks, times a margin."""
    probe = ProjectionSystem(vertices, 1.0, dpi)
    rep = validate_axioms(probe)
    base = max(rep.minimal_valid_xi, float(np.nextafter(rep.axiom0_bound, np.inf)))
    xi = max(XI_MARGIN * base, XI_FLOOR)
    return xi, {"behrstock_max": rep.minimal_valid_xi, "axiom0_bound": rep.axiom0_bound}


def geodesic_system(geodesics, xi=None, name="geodesics", ids=None, meta=None):
    """Projection system from an explicit list of geodesics."""
    geodesics = [g if isinstance(g, Geodesic) else Geodesic(*g) for g in geodesics]
    ids = list(ids) if ids is not None else [f"G{i}" for i in range(len(geodesics))]
    return GeodesicSystem(ids, geodesics, xi=xi, name=name, meta=meta)


def _word_label(word, i):
    return f"X{i + 1}" if not word else f"{word}.X{i + 1}"


def schottky_instance(generators=DEFAULT_GENERATORS, word_radius=2, words=None, xi=None,
                      name=None, bases=None):
    """Translates of the generator axes under all reduced words up to ``word_radius``.

    ``words`` replaces the enumeration with an explicit list (reduced words
    in the generator letters) and ``bases`` the translated geodesics.
    Translates with the same endpoints as an earlier one are dropped, as
    are translates whose endpoints merge in floating point.
    """
    generators = [g if isinstance(g, MoebiusMap) else MoebiusMap.from_matrix(g) for g in generators]
    if not generators:
        raise ValueError("at least one generator is required")
    axes = [axis_of(g)[0] for g in generators] if bases is None else list(bases)
    explicit = words is not None
    if explicit:
        words = [reduce_word(w) for w in words]
    else:
        words = reduced_words(len(generators), word_radius)
    ids, geos, labels = [], [], {}
    seen = {}
    dropped = 0
    for w in words:
        m = word_matrix(generators, w)
        for i, ax in enumerate(axes):
            try:
                g = apply_moebius(m, ax)
            except ValueError:
                dropped += 1
                continue
            key = g.key()
            if key in seen:
                continue
            seen[key] = len(geos)
            label = _word_label(w, i)
            ids.append(label)
            geos.append(g)
            labels[label] = (w, i)
    meta = {"generators": [g.matrix.tolist() for g in generators],
            "word_radius": max((len(w) for w in words), default=0) if explicit else word_radius,
            "degenerate_dropped": dropped}
    return GeodesicSystem(ids, geos, xi=xi, name=name or f"schottky-r{word_radius}", meta=meta,
                          generators=generators, labels=labels, bases=axes)


def random_geodesic_instance(count, seed, endpoint_range=(-10.0, 10.0), min_gap=0.05, xi=None):
    """``count`` geodesics with uniformly random endpoints at least ``min_gap`` apart."""
    rng = np.random.default_rng(seed)
    lo, hi = endpoint_range
    if count * 2 * min_gap > (hi - lo):
        raise ValueError("endpoint range too small for the requested count and gap")
    pts = []
    while len(pts) < 2 * count:
        t = float(rng.uniform(lo, hi))
        if all(abs(t - s) >= min_gap for s in pts):
            pts.append(t)
    geos = [Geodesic(BoundaryPoint(pts[2 * i]), BoundaryPoint(pts[2 * i + 1])) for i in range(count)]
    return geodesic_system(geos, xi=xi, name=f"random-{count}-s{seed}",
                           ids=[f"R{i}" for i in range(count)],
                           meta={"seed": seed, "endpoint_range": [lo, hi], "min_gap": min_gap})


def zigzag_element(step=6.0):
    """Loxodromic element: rotation by pi/2 about i, then translation along (0, inf)."""
    c = s = math.sqrt(0.5)
    e = math.exp(step / 2)
    return MoebiusMap(e * c, e * s, -s / e, c / e)


def chain_instance(n=8, step=6.0, xi=None):
    """Translates ``h^k (0, inf)`` of the vertical axis by powers of the zigzag element.

    Consecutive members see each other with projection distance ``step``;
    far members project to a short interval.  Ids ``C0 .. C{n-1}`` follow
    the chain order.
    """
    if n < 1:
        raise ValueError("chain needs at least one member")
    h = zigzag_element(step)
    base = Geodesic(BoundaryPoint(0.0), INF)
    words = ["a" * k if k >= 0 else "A" * -k for k in range(-(n // 2), n - n // 2)]
    geos = [apply_moebius(word_matrix([h], w), base) for w in words]
    ids = [f"C{i}" for i in range(n)]
    return GeodesicSystem(ids, geos, xi=xi, name=f"chain-{n}", meta={"step": step},
                          generators=(h,), labels={i: (w, 0) for i, w in zip(ids, words)},
                          bases=(base,))


MONOTONICITY_COUNTEREXAMPLE = {
    "X": (5.41, 4.86),
    "Y": (-4.2, 3.62),
    "Z": (-3.64, -3.78),
    "W": (-1.05, -0.74),
}


def monotonicity_counterexample(xi=None):
    """Four geodesics where the raw projection distance is not monotone.

    With the measured constant, ``dpi_Y(X, Z)`` exceeds ``4 xi`` while
    ``dpi_W(X, Y)`` exceeds ``dpi_W(X, Z)``.
    """
    names = list(MONOTONICITY_COUNTEREXAMPLE)
    geos = [Geodesic(*MONOTONICITY_COUNTEREXAMPLE[k]) for k in names]
    return geodesic_system(geos, xi=xi, name="monotonicity-counterexample", ids=names)
