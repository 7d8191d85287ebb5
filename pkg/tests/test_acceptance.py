"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -v -s``; the verdicts
are also collected in the pytest terminal summary.
"""
import json
import math
import time

import networkx as nx
import numpy as np
import pytest

from oracles import bottleneck_oracle, dpi_oracle
from quasitree.action import (ActionContext, check_equivariance, combinatorial_axis,
                              translation_length_estimate)
from quasitree.blowup import build_blowup, check_blowup, check_isometric_embedding
from quasitree.cli import main
from quasitree.complex import (bottleneck_delta, build_complex, check_complex,
                               geodesic_count)
from quasitree.core import CoreParams, auto_K
from quasitree.hyperbolic import (Geodesic, chain_instance, dpi_geodesics, orbit_words,
                                  random_geodesic_instance, schottky_instance)

RANDOM_SEEDS = range(20)
SEED = 0


@pytest.fixture(scope="module")
def schottky():
    return schottky_instance(word_radius=3)


@pytest.fixture(scope="module")
def random_instances():
    return [random_geodesic_instance(30, seed) for seed in RANDOM_SEEDS]


@pytest.fixture(scope="module")
def instances(schottky, random_instances):
    return [schottky, *random_instances]


def distinct_triples(n):
    """Mask over ``[y, x, z]`` of triples with three different indices."""
    i = np.arange(n)
    y, x, z = np.meshgrid(i, i, i, indexing="ij")
    return (y != x) & (y != z) & (x != z)


def monotonicity_exceptions(d, theta):
    """Quadruples where ``d[y, x, z] >= theta`` yet some other w sees x or z
    farther from y than from each other.  Returns (checked, exceptions)."""
    n = d.shape[0]
    checked = bad = 0
    idx = np.arange(n)
    for x in range(n):
        for z in range(n):
            if x == z:
                continue
            ys = idx[(idx != x) & (idx != z)]
            ys = ys[d[ys, x, z] >= theta]
            for y in ys:
                ws = idx[(idx != x) & (idx != y) & (idx != z)]
                ref = d[ws, x, z]
                checked += ws.size
                bad += int(((d[ws, x, y] > ref) | (d[ws, z, y] > ref)).sum())
    return checked, bad


# ---------------------------------------------------------------- modified distance


def test_criterion_01_quasi_equal(instances, acceptance_line):
    worst_gap, bad, triples, slowest = 0.0, 0, 0, 0.0
    for s in instances:
        t = time.perf_counter()
        D, d = s.dpi_table, s.modified_table
        mask = distinct_triples(s.n)
        gap = (D - d)[mask]
        bad += int((~((gap >= 0) & (gap < 2 * s.xi))).sum())
        triples += int(mask.sum())
        worst_gap = max(worst_gap, float((gap / (2 * s.xi)).max()))
        slowest = max(slowest, time.perf_counter() - t)
    ok = bad == 0 and slowest < 120
    acceptance_line(1, ok, f"0 <= dpi - d < 2 xi on {triples} triples over {len(instances)} "
                           f"instances; exceptions={bad}, max gap/(2 xi)={worst_gap:.4f}, "
                           f"slowest instance {slowest:.2f}s")
    assert ok


def test_criterion_02_monotonicity(instances, acceptance_line):
    total = bad = swept = 0
    for s in instances:
        checked, exceptions = monotonicity_exceptions(s.modified_table, 4 * s.xi)
        total += checked
        bad += exceptions
        swept += s.n ** 4
    ok = bad == 0
    acceptance_line(2, ok, f"monotonicity at theta = 4 xi: {swept} quadruples swept, "
                           f"{total} with the premise met, exceptions={bad}")
    assert ok


def test_criterion_03_behrstock(instances, acceptance_line):
    bad = triples = 0
    worst = 0.0
    for s in instances:
        d = s.modified_table
        mask = distinct_triples(s.n)
        both = np.minimum(d, np.transpose(d, (2, 1, 0)))[mask]
        bad += int((~(both < s.xi)).sum())
        triples += int(mask.sum())
        worst = max(worst, float((both / s.xi).max()))
    ok = bad == 0
    acceptance_line(3, ok, f"min(d_Y(X,Z), d_Z(X,Y)) < xi on {triples} triples; "
                           f"exceptions={bad}, max ratio to xi={worst:.4f}")
    assert ok


# ---------------------------------------------------------------- projection complex


@pytest.fixture(scope="module")
def complexes(schottky, random_instances):
    """Instances with auto-validated K and their complexes."""
    out = []
    for s in [schottky, chain_instance(), *random_instances[:5]]:
        params, _ = auto_K(s, CoreParams.derive(s.xi))
        out.append((s, params, build_complex(s, params)))
    return out


def test_criterion_04_distance_bounds(complexes, acceptance_line):
    failed = []
    pairs = 0
    max_geodesics = 0
    derived = True
    for s, p, c in complexes:
        derived &= math.isclose(p.Kprime, 5 * p.K + 30 * s.xi)
        checks = {ch.tag: ch for ch in check_complex(s, p, c)}
        for tag in ("complex.connected-upper-bound", "complex.kprime-lower-bound",
                    "complex.geodesic-containment"):
            if checks[tag].violations:
                failed.append(f"{s.name}:{tag}")
        pairs += checks["complex.connected-upper-bound"].checked
        for i in range(s.n):
            for j in range(i + 1, s.n):
                max_geodesics = max(max_geodesics, geodesic_count(c, i, j))
    ok = not failed and derived and max_geodesics <= 10 ** 6
    acceptance_line(4, ok, f"|Y_K'|+1 <= d <= |Y_K|+1 and containment on {pairs} pairs of "
                           f"{len(complexes)} auto-K instances; max geodesics={max_geodesics}; "
                           f"failures={failed or 0}")
    assert ok


def test_criterion_05_separation_and_bottleneck(complexes, schottky, acceptance_line):
    sep_bad = sep_checked = 0
    for s, p, c in complexes:
        sep = {ch.tag: ch for ch in check_complex(s, p, c)}["complex.midpath-separation"]
        sep_bad += sep.violations
        sep_checked += sep.checked
    params = CoreParams.derive(schottky.xi)
    delta = bottleneck_delta(build_complex(schottky, params)).delta
    auto = max(bottleneck_delta(c).delta for _, _, c in complexes)
    ok = sep_bad == 0 and delta <= 9 and auto <= 9
    acceptance_line(5, ok, f"ball separation: {sep_checked} (pair, Y) checks, failures="
                           f"{sep_bad}; bottleneck of the default Schottky complex = {delta:g}, "
                           f"max over auto-K complexes = {auto:g} (bound 9)")
    assert ok


def _adjacency(G):
    return nx.to_numpy_array(G, nodelist=sorted(G.nodes), dtype=bool)


def test_criterion_06_bottleneck_calibration(acceptance_line):
    tree = nx.balanced_tree(2, 4)
    cycle = nx.cycle_graph(8)
    t_val = bottleneck_delta(_adjacency(tree)).delta
    c_val = bottleneck_delta(_adjacency(cycle)).delta
    t_ref, c_ref = bottleneck_oracle(tree), bottleneck_oracle(cycle)
    ok = t_val == 0 == t_ref and c_val == 3 == c_ref
    acceptance_line(6, ok, f"tree -> {t_val:g} (exhaustive {t_ref}), "
                           f"C8 -> {c_val:g} (exhaustive {c_ref})")
    assert ok


# ---------------------------------------------------------------- blowup


@pytest.fixture(scope="module")
def blowups(schottky):
    out = []
    for s in (chain_instance(), schottky_instance(word_radius=2), schottky):
        p = CoreParams.derive(s.xi)
        space = build_blowup(s, p, build_complex(s, p))
        checks = {ch.tag: ch for ch in check_blowup(space, s, p, pairs=200, seed=SEED)}
        out.append((s, p, space, checks))
    return out


def test_criterion_07_sandwich(blowups, acceptance_line):
    sand = sp = sampled = 0
    ratio = 0.0
    for _, _, _, checks in blowups:
        sand += checks["blowup.sandwich"].violations
        sp += checks["blowup.standard-path"].violations
        sampled += checks["blowup.sandwich"].checked
        ratio = max(ratio, checks["blowup.sandwich"].measured["max_upper_ratio"])
    ok = sand == 0 and sp == 0
    acceptance_line(7, ok, f"distance sandwich on {sampled} seeded pairs over {len(blowups)} "
                           f"blowups: failures={sand}; standard-path bound failures={sp}; "
                           f"max upper/actual={ratio:.2f}")
    assert ok


def test_criterion_08_total_geodesy(blowups, acceptance_line):
    small = [(s, space) for s, _, space, _ in blowups if space.n_nodes <= 2000]
    bad = [f"{s.name}:{v}" for s, space in small for v in s.vertices
           if not check_isometric_embedding(space, v)]
    spaces = sum(s.n for s, _ in small)
    ok = bool(small) and not bad
    acceptance_line(8, ok, f"vertex spaces isometrically embedded: {spaces} spaces in "
                           f"{len(small)} blowups of <= 2000 nodes; failures={len(bad)}")
    assert ok


def test_criterion_09_traces(blowups, acceptance_line):
    contig = visits = order = 0
    flagged = []
    sampled = 0
    for s, p, _, checks in blowups:
        contig += checks["blowup.trace-contiguity"].violations
        visits += checks["blowup.trace-visits"].violations
        order += checks["blowup.trace-order"].violations
        sampled += checks["blowup.trace-contiguity"].checked
        if checks["blowup.trace-defects"].status == "flag":
            flagged.append(s.name)
    ok = contig == visits == order == 0
    acceptance_line(9, ok, f"traced geodesics on {sampled} pairs: non-contiguous={contig}, "
                           f"missed spaces={visits}, out of order={order}; endpoint defects "
                           f"flagged on {flagged or 'none'}")
    assert ok


# ---------------------------------------------------------------- group action


def test_criterion_10_group_action(schottky, acceptance_line):
    ctx = ActionContext(schottky)
    eq = check_equivariance(ctx, sample_count=500, seed=SEED)

    win = schottky_instance(schottky.generators, words=orbit_words("a", 8, 4),
                            bases=schottky.bases)
    wp = CoreParams.derive(win.xi)
    wctx = ActionContext(win)
    curve = translation_length_estimate(wctx, build_complex(win, wp), wctx.element("a"), 8,
                                        Kprime=wp.Kprime)

    axis_win = schottky_instance(schottky.generators, words=orbit_words("ab", 4),
                                 bases=schottky.bases)
    actx = ActionContext(axis_win)
    K = 4 * axis_win.xi
    fwd = combinatorial_axis(actx, actx.element("ab"), K, 2.0)
    back = combinatorial_axis(actx, actx.element("ab").inverse(), K, 2.0)

    eq_ok = eq["samples"] == 500 and eq["max_defect"] <= 1e-6
    curve_ok = len(curve["per_k"]) == 8 and min(curve["per_k"]) > 0
    axis_ok = (fwd["ordered"] and fwd["is_shift"] and len(fwd["axis"]) > 2
               and fwd["betweenness_violations"] == fwd["order_violations"] == 0
               and fwd["invariance_gaps"] == 0 and back["axis"] == fwd["axis"][::-1])
    ok = eq_ok and curve_ok and axis_ok
    acceptance_line(10, ok, f"equivariance defect {eq['max_defect']:.2e} on {eq['samples']} "
                            f"samples; d(Y, a^k Y)/k for k<=8 min {min(curve['per_k']):.3f}; "
                            f"axis of ab: {len(fwd['axis'])} elements, shifts {fwd['shifts']}")
    assert ok


# ---------------------------------------------------------------- reproducibility


def test_criterion_11_determinism(tmp_path, acceptance_line):
    cfg = tmp_path / "run.toml"
    cfg.write_text('instance = "schottky-default"\nradius = 2\nseed = 11\npairs = 60\n'
                   'samples = 200\nsuites = ["axioms", "theorem-main", "complex", '
                   '"blowup", "action"]\n')
    codes, blobs = [], []
    for name in ("first", "second"):
        codes.append(main(["analyze", "--config", str(cfg), "--out", str(tmp_path / name)]))
        blobs.append((tmp_path / name / "report.json").read_bytes())
    ok = codes == [0, 0] and blobs[0] == blobs[1]
    acceptance_line(11, ok, f"two runs of one config: exit codes {codes}, report.json "
                            f"{'byte-identical' if blobs[0] == blobs[1] else 'DIFFERS'} "
                            f"({len(blobs[0])} bytes, {len(json.loads(blobs[0])['suites'])} "
                            f"suites)")
    assert ok


# ---------------------------------------------------------------- hyperbolic geometry


def random_configuration(rng):
    """Three geodesics on a common window with pairwise distinct endpoints."""
    while True:
        pts = rng.uniform(-10, 10, size=6)
        gaps = np.abs(np.subtract.outer(pts, pts))[np.triu_indices(6, 1)]
        if gaps.min() > 0.05:
            return [tuple(pts[i:i + 2]) for i in (0, 2, 4)]


def test_criterion_12_geometry_oracle(acceptance_line):
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for _ in range(1000):
        Y, X, Z = random_configuration(rng)
        fast = dpi_geodesics(Geodesic(*Y), Geodesic(*X), Geodesic(*Z))
        worst = max(worst, abs(fast - dpi_oracle(Y, X, Z)))
    ok = worst <= 1e-4
    acceptance_line(12, ok, f"endpoint formula vs nearest-point minimization on 1000 random "
                            f"configurations: max deviation {worst:.2e} (tolerance 1e-4)")
    assert ok
