"""Group actions on geodesic instances.

Group elements are reduced words in the instance's generators.  An element
acts on vertices by moving the underlying geodesic and looking the image up
among the enumerated vertices; images outside the enumerated window are
reported as skips, never silently dropped.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from quasitree.core import OrderError, _sort_indices
from quasitree.hyperbolic import (MoebiusMap, apply_moebius, invert_word, reduce_word,
                                  reduced_words, word_matrix)


@dataclass(frozen=True)
class GroupElement:
    word: str
    matrix: MoebiusMap = field(compare=False)

    @classmethod
    def from_word(cls, generators, word):
        word = reduce_word(word)
        return cls(word, word_matrix(generators, word))

    def inverse(self):
        return GroupElement(invert_word(self.word), self.matrix.inverse())


class ActionContext:
    """A geodesic instance together with its generators and an image cache."""

    def __init__(self, system):
        if not getattr(system, "generators", None):
            raise ValueError("the instance has no generators to act with")
        self.system = system
        self.generators = tuple(system.generators)
        self._cache = {}

    def element(self, word):
        return GroupElement.from_word(self.generators, word)

    def power(self, g, k):
        word = g.word * k if k >= 0 else invert_word(g.word) * (-k)
        return self.element(word)

    def image(self, g, iy):
        """Index of ``g`` applied to vertex ``iy``, or None when out of window."""
        key = (g.word, iy)
        if key not in self._cache:
            try:
                moved = self._move(g, iy)
            except ValueError:
                # endpoints merged in floating point: certainly not enumerated
                self._cache[key] = None
            else:
                self._cache[key] = self.system.locate(moved)
        return self._cache[key]

    def _move(self, g, iy):
        # Recompute from the word when the vertex has one: applying g to the
        # stored geodesic amplifies its rounding error and breaks the lookup.
        label = self.system.labels.get(self.system.vertices[iy])
        if label is None:
            return apply_moebius(g.matrix, self.system.geodesics[iy])
        word, base = label
        m = word_matrix(self.generators, reduce_word(g.word + word))
        return apply_moebius(m, self.system.bases[base])

    def fixed(self, g, iy):
        return self.image(g, iy) == iy


# ---------------------------------------------------------------- equivariance


def check_equivariance(ctx, sample_count=500, seed=0, words=None, max_attempts=None):
    """Largest change in projection distance under the action, over in-window samples.

    Draws an element from ``words`` (default: all reduced words of length
    at most 2) and a triple of vertices; triples with any image outside the
    window are skipped and counted.
    """
    rng = np.random.default_rng(seed)
    if words is None:
        words = reduced_words(len(ctx.generators), 2)
    elements = [ctx.element(w) for w in words]
    D = ctx.system.dpi_table
    n = ctx.system.n
    if n < 2:
        return {"max_defect": 0.0, "samples": 0, "skipped": 0}
    max_attempts = max_attempts or 50 * sample_count
    worst = 0.0
    samples = skipped = 0
    attempts = 0
    while samples < sample_count and attempts < max_attempts:
        attempts += 1
        g = elements[int(rng.integers(len(elements)))]
        a = int(rng.integers(n))
        b, c = (int(v) for v in rng.integers(n, size=2))
        if a in (b, c):
            continue
        ga, gb, gc = ctx.image(g, a), ctx.image(g, b), ctx.image(g, c)
        if ga is None or gb is None or gc is None:
            skipped += 1
            continue
        samples += 1
        worst = max(worst, abs(float(D[ga, gb, gc]) - float(D[a, b, c])))
    return {"max_defect": worst, "samples": samples, "skipped": skipped}


# ---------------------------------------------------------------- translation length


def default_base(ctx, g):
    """First vertex not fixed by ``g`` (a generator fixes its own axis)."""
    for iy in range(ctx.system.n):
        img = ctx.image(g, iy)
        if img is not None and img != iy:
            return iy
    return 0


def translation_length_estimate(ctx, complex_, g, k_max, base=None, theta=None, Kprime=None):
    """``d(Y, g^k Y) / k`` for k = 1..k_max along the projection complex.

    Stops at the first power whose image leaves the window.  Also evaluates
    the growth hypothesis ``d_Y(g^-N Y, g^N Y) > Kprime`` for N up to k_max.
    """
    system = ctx.system
    iy = default_base(ctx, g) if base is None else system.ix(base)
    d = system.modified_table
    Kprime = Kprime if Kprime is not None else float("inf")
    per_k = []
    truncated = False
    for k in range(1, k_max + 1):
        img = ctx.image(ctx.power(g, k), iy)
        if img is None:
            truncated = True
            break
        per_k.append(int(complex_.dist[iy, img]) / k)
    hypothesis = []
    for N in range(1, k_max + 1):
        lo, hi = ctx.image(ctx.power(g, -N), iy), ctx.image(ctx.power(g, N), iy)
        if lo is None or hi is None or lo == iy or hi == iy or lo == hi:
            continue
        hypothesis.append((N, float(d[iy, lo, hi])))
    met = any(v > Kprime for _, v in hypothesis)
    positive = bool(per_k) and min(per_k) > 0
    return {
        "base": system.vertices[iy],
        "word": g.word,
        "per_k": per_k,
        "tau_hat": per_k[-1] if per_k else None,
        "truncated": truncated,
        "hypothesis": hypothesis,
        "hypothesis_met": met,
        "positive": positive,
        "ok": positive or not met,
    }


# ---------------------------------------------------------------- combinatorial axis


def _chain_order(system, members, K):
    """Order members along the chain they form, or raise OrderError."""
    d = system.modified_table
    if len(members) <= 1:
        return list(members)
    best = None
    for a, b in combinations(members, 2):
        inner = [m for m in members if m not in (a, b) and d[m, a, b] > K]
        key = (len(inner), -a, -b)
        if best is None or key > best[0]:
            best = (key, a, b)
    _, a, b = best
    rest = [m for m in members if m not in (a, b)]
    return [a, *_sort_indices(d, system.xi, a, b, rest), b]


def combinatorial_axis(ctx, g, K, Kprime, N=1):
    """Vertices whose projection of ``g^-N Y`` and ``g^N Y`` exceeds ``Kprime``.

    Returns the members in chain order together with the checks: each
    member between two others sees them K-apart, ``g`` maps the set into
    itself where defined, preserves the order and acts as a constant shift.
    """
    system = ctx.system
    d = system.modified_table
    back, fwd = ctx.power(g, -N), ctx.power(g, N)
    members, skipped = [], 0
    for iy in range(system.n):
        lo, hi = ctx.image(back, iy), ctx.image(fwd, iy)
        if lo is None or hi is None:
            skipped += 1
            continue
        if iy in (lo, hi) or lo == hi:
            continue
        if d[iy, lo, hi] > Kprime:
            members.append(iy)
    try:
        chain = _chain_order(system, members, K)
    except OrderError as exc:
        return {"axis": [system.vertices[i] for i in members], "ordered": False, "error": str(exc),
                "skipped": skipped}
    # orient so that g moves forward
    pos = {m: i for i, m in enumerate(chain)}
    shifts = []
    for m in chain:
        img = ctx.image(g, m)
        if img in pos:
            shifts.append(pos[img] - pos[m])
    if shifts and np.median(shifts) < 0:
        chain = chain[::-1]
        pos = {m: i for i, m in enumerate(chain)}
        shifts = [-s for s in shifts]

    between_bad = 0
    for i, j, k in combinations(range(len(chain)), 3):
        if not d[chain[j], chain[i], chain[k]] > K:
            between_bad += 1
    invariance_gaps = 0
    order_bad = 0
    images = {}
    for m in chain:
        img = ctx.image(g, m)
        if img is None:
            continue
        lo, hi = ctx.image(back, img), ctx.image(fwd, img)
        if lo is None or hi is None:
            continue
        if img not in pos:
            invariance_gaps += 1
        else:
            images[m] = img
    for a, b in combinations([m for m in chain if m in images], 2):
        if (pos[a] < pos[b]) != (pos[images[a]] < pos[images[b]]):
            order_bad += 1
    shift_values = sorted(set(shifts))
    return {
        "axis": [system.vertices[i] for i in chain],
        "ordered": True,
        "betweenness_violations": between_bad,
        "invariance_gaps": invariance_gaps,
        "order_violations": order_bad,
        "shifts": shift_values,
        "is_shift": len(shift_values) == 1 and shift_values[0] > 0,
        "skipped": skipped,
    }


# ---------------------------------------------------------------- WPD probe


def wpd_probe(ctx, complex_, g, D, M, word_radius, base=None):
    """Count words phi with ``d(phi g^i Y, g^i Y) <= D`` for ``i = -M`` and ``i = M``."""
    system = ctx.system
    iy = default_base(ctx, g) if base is None else system.ix(base)
    points = []
    for i in (-M, M):
        img = ctx.image(ctx.power(g, i), iy)
        if img is None:
            return {"count": 0, "skipped": 0, "error": f"g^{i} moves the base out of the window"}
        points.append(img)
    count = skipped = 0
    found = []
    for w in reduced_words(len(ctx.generators), word_radius):
        phi = ctx.element(w)
        moved = [ctx.image(phi, p) for p in points]
        if any(m is None for m in moved):
            skipped += 1
            continue
        if all(complex_.dist[m, p] <= D for m, p in zip(moved, points)):
            count += 1
            found.append(w)
    return {"count": count, "skipped": skipped, "words": found, "D": D, "M": M,
            "radius": word_radius, "base": system.vertices[iy]}


__all__ = [
    "ActionContext", "GroupElement", "OrderError", "check_equivariance", "combinatorial_axis",
    "default_base", "translation_length_estimate", "wpd_probe",
]
