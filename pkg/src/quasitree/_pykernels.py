"""Numpy implementations of the hot loops.

Same signatures and results as the compiled ``_ckernels`` module; used when
the extension is unavailable or ``QUASITREE_PURE_PYTHON=1`` is set.

Tables are dense ``(n, n, n)`` float arrays indexed ``[y, x, z]`` with NaN
wherever ``y`` is one of the arguments.  NaN compares false, which the
clause tests below rely on.
"""
from collections import deque

import numpy as np


def modified_table(dpi, xi):
    dpi = np.ascontiguousarray(dpi, dtype=float)
    n = dpi.shape[0]
    two = 2.0 * xi
    with np.errstate(invalid="ignore"):
        big = dpi > two
    finite = np.where(np.isnan(dpi), np.inf, dpi)
    out = np.full((n, n, n), np.nan)
    for x in range(n):
        for z in range(n):
            if x == z:
                continue
            mask = big[x] & big[z]
            mask[x, :] |= big[z, x, :]
            mask[:, z] |= big[x, :, z]
            mask[x, z] = True
            xs, zs = np.nonzero(mask)
            vals = finite[:, xs, zs].min(axis=1)
            vals[x] = np.nan
            vals[z] = np.nan
            out[:, x, z] = vals
    idx = np.arange(n)
    for y in range(n):
        keep = idx != y
        out[y, idx[keep], idx[keep]] = dpi[y, idx[keep], idx[keep]]
    return out


def monotonicity_violations(d, theta):
    """Count quadruples breaking ``d_Y(X,Z) >= theta => d_W(X,Y), d_W(Z,Y) <= d_W(X,Z)``.

    Returns ``(checked, violations, example)`` where example is the first
    offending ``(x, y, z, w)`` in loop order, or None.
    """
    d = np.asarray(d, dtype=float)
    n = d.shape[0]
    checked = 0
    violations = 0
    example = None
    with np.errstate(invalid="ignore"):
        for x in range(n):
            a = d[:, x, :]
            ys, zs = np.nonzero(a >= theta)
            keep = zs != x
            ys, zs = ys[keep], zs[keep]
            if ys.size == 0:
                continue
            ref = a[:, zs]
            bad = (a[:, ys] > ref) | (d[:, zs, ys] > ref)
            checked += ys.size * (n - 3)
            count = int(bad.sum())
            if count:
                violations += count
                # first in (z, y, w) loop order, matching the compiled kernel
                order = np.lexsort((ys, zs))
                for col in order:
                    ws = np.nonzero(bad[:, col])[0]
                    if ws.size:
                        cand = (x, int(ys[col]), int(zs[col]), int(ws[0]))
                        if example is None:
                            example = cand
                        break
    return checked, violations, example


def bfs_all_pairs(indptr, indices, n):
    indptr = np.asarray(indptr)
    indices = np.asarray(indices)
    dist = np.full((n, n), -1, dtype=np.int64)
    for s in range(n):
        row = dist[s]
        row[s] = 0
        queue = deque([s])
        while queue:
            u = queue.popleft()
            du = row[u] + 1
            for v in indices[indptr[u]:indptr[u + 1]]:
                if row[v] < 0:
                    row[v] = du
                    queue.append(v)
    return dist


def reachable(indptr, indices, blocked, src, dst):
    """True when ``dst`` can be reached from ``src`` avoiding ``blocked`` vertices."""
    if blocked[src] or blocked[dst]:
        return False
    if src == dst:
        return True
    seen = np.array(blocked, dtype=bool)
    seen[src] = True
    queue = deque([src])
    while queue:
        u = queue.popleft()
        for v in indices[indptr[u]:indptr[u + 1]]:
            if not seen[v]:
                if v == dst:
                    return True
                seen[v] = True
                queue.append(v)
    return False
