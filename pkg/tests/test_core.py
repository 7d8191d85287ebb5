import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import h_pairs, modified_oracle
from quasitree.complex import build_complex
from quasitree.core import (BarrierError, CoreParams, OrderError, ProjectionSystem,
                            TabularSystem, auto_K, check_theorem_main, find_barrier, h_set,
                            is_barrier, is_guard, large_set, modified_distance, order_interval,
                            validate_axioms)
from quasitree.hyperbolic import (MONOTONICITY_COUNTEREXAMPLE, monotonicity_counterexample,
                                  random_geodesic_instance)


def four_table():
    """dpi_C(A,B) = dpi_C(A,D) = 10; everything seen from A or B is small."""
    entries = {("C", "A", "B"): 10, ("C", "A", "D"): 10}
    for y in "AB":
        for x, z in (("C", "D"), ("A", "C"), ("A", "D"), ("B", "C"), ("B", "D")):
            if y not in (x, z):
                entries[(y, x, z)] = 0.4
    return TabularSystem.from_entries("ABCD", 1.0, entries)


# ---------------------------------------------------------------- axioms


def test_tiny_systems_are_valid():
    for names in (["A"], ["A", "B"]):
        s = TabularSystem.from_entries(names, 1.0, {})
        assert validate_axioms(s).ok


def test_behrstock_violation_reported():
    s = TabularSystem.from_entries("XYZ", 1.0, {("Y", "X", "Z"): 5, ("X", "Y", "Z"): 5})
    rep = validate_axioms(s)
    assert not rep.ok
    assert rep.counts["behrstock"] > 0
    assert rep.minimal_valid_xi > 5
    assert any(v["axiom"] == "behrstock" for v in rep.violations)


def test_triangle_violation_reported():
    s = TabularSystem.from_entries("YABC", 10.0, {("Y", "A", "C"): 5, ("Y", "A", "B"): 1,
                                                  ("Y", "B", "C"): 1})
    rep = validate_axioms(s)
    assert rep.counts["triangle"] > 0 and not rep.ok


def test_asymmetric_entries_rejected():
    with pytest.raises(ValueError):
        TabularSystem.from_entries("XYZ", 1.0, {("Y", "X", "Z"): 1, ("Y", "Z", "X"): 2})


def test_tabular_json_round_trip():
    s = four_table()
    t = TabularSystem.from_dict(s.to_dict())
    assert np.array_equal(s.dpi_table, t.dpi_table, equal_nan=True)
    assert s.digest() == t.digest()


def test_tabular_from_dict_symmetric_completion():
    s = TabularSystem.from_dict({"xi": 1, "vertices": ["A", "B", "C"], "dpi": {"C": {"A|B": 3}}})
    assert s.dpi("C", "B", "A") == 3.0


# ---------------------------------------------------------------- constants


def test_params_defaults():
    p = CoreParams.derive(0.5)
    assert (p.theta, p.K, p.Kprime, p.L) == (2.0, 15.0, 90.0, 17.0)


@pytest.mark.parametrize("kw", [dict(theta=1.0), dict(K=1.0), dict(K=20, Kprime=20),
                                dict(L=15.0)])
def test_params_invariants(kw):
    with pytest.raises(ValueError):
        CoreParams.derive(0.5, **kw)


def test_params_must_match_system():
    s = four_table()
    with pytest.raises(ValueError):
        order_interval(s, CoreParams.derive(2.0), "A", "B", 100.0)


# ---------------------------------------------------------------- pair sets and modified distance


def test_h_set_singleton_when_nothing_is_large():
    s = TabularSystem.from_entries("ABCD", 1.0, {("C", "A", "B"): 1.5})
    assert h_set(s, "A", "B").members == {("A", "B")}


def test_h_set_of_four_table():
    s = four_table()
    hs = h_set(s, "A", "B")
    D = s.dpi_table
    ref = {(s.vertices[a], s.vertices[b]) for a, b in h_pairs(D, s.xi, 0, 1)}
    assert hs.members == ref == {("A", "B")}
    assert modified_distance(s, "C", "A", "B") == 10.0


def test_h_set_swap_symmetry(schottky2):
    s = schottky2.system
    for X, Z in [(s.vertices[0], s.vertices[5]), (s.vertices[3], s.vertices[11])]:
        fwd = h_set(s, X, Z).members
        back = h_set(s, Z, X).members
        assert back == {(b, a) for a, b in fwd}


def test_h_set_rejects_equal_arguments():
    with pytest.raises(ValueError):
        h_set(four_table(), "A", "A")


def _compare_with_oracle(system):
    D, d, n = system.dpi_table, system.modified_table, system.n
    for y in range(n):
        for x in range(n):
            for z in range(n):
                if len({x, y, z}) < 3:
                    continue
                assert d[y, x, z] == modified_oracle(D, system.xi, y, x, z)


def test_modified_table_matches_enumeration_on_counterexample():
    _compare_with_oracle(monotonicity_counterexample())


def test_modified_table_matches_enumeration_on_schottky(schottky2):
    s = schottky2.system
    assert (np.abs(s.dpi_table - s.modified_table) > 0).sum() > 0  # not vacuous
    _compare_with_oracle(s)


@given(st.integers(0, 10_000), st.floats(0.05, 3.0))
def test_modified_table_matches_enumeration_random(seed, xi):
    # a fixed xi (not the measured one) makes many pair sets non-trivial
    s = random_geodesic_instance(7, seed, xi=xi)
    _compare_with_oracle(s)


@given(st.integers(0, 10_000), st.floats(1.0, 3.0))
def test_quasi_equal_and_symmetric(seed, factor):
    # the bound needs the axioms, so xi is at least the measured constant
    s = random_geodesic_instance(8, seed)
    xi = s.xi * factor
    s = s.with_xi(xi)
    D, d = s.dpi_table, s.modified_table
    ok = ~np.isnan(D)
    gap = (D - d)[ok]
    assert (gap >= 0).all() and (gap < 2 * xi).all()
    assert np.array_equal(d, np.swapaxes(d, 1, 2), equal_nan=True)


def test_diagonal_keeps_projection_diameter(schottky2):
    s = schottky2.system
    idx = np.arange(s.n)
    for y in range(s.n):
        keep = idx != y
        assert np.array_equal(s.modified_table[y, idx[keep], idx[keep]],
                              s.dpi_table[y, idx[keep], idx[keep]])


def test_tabular_and_generic_systems_agree():
    s = monotonicity_counterexample()
    t = ProjectionSystem(s.vertices, s.xi, s.dpi_table)
    assert np.array_equal(s.modified_table, t.modified_table, equal_nan=True)


# ---------------------------------------------------------------- large sets and order


def test_large_set_empty_above_max(chain):
    s, p = chain.system, chain.params
    top = float(np.nanmax(s.modified_table)) + 1
    assert large_set(s, p, "C0", "C7", top) == []


def test_large_set_is_the_chain_between(chain):
    s, p = chain.system, chain.params
    assert large_set(s, p, "C0", "C7", 5.0) == [f"C{i}" for i in range(1, 7)]
    assert large_set(s, p, "C7", "C0", 5.0) == large_set(s, p, "C0", "C7", 5.0)
    assert large_set(s, p, "C2", "C5", 5.0) == ["C3", "C4"]


def test_large_set_below_theta_rejected(chain):
    with pytest.raises(ValueError):
        large_set(chain.system, chain.params, "C0", "C7", chain.params.theta / 2)


def test_large_set_monotone_in_threshold(schottky2):
    s, p = schottky2.system, schottky2.params
    X, Z = s.vertices[0], s.vertices[-1]
    sizes = [len(large_set(s, p, X, Z, t)) for t in np.linspace(p.theta, 15, 12)]
    assert sizes == sorted(sizes, reverse=True)


def test_order_interval_empty_is_endpoints():
    s = four_table()
    p = CoreParams.derive(1.0)
    assert order_interval(s, p, "A", "C", 100.0).elements == ("A", "C")


def test_order_interval_follows_the_chain(chain):
    s, p = chain.system, chain.params
    iv = order_interval(s, p, "C0", "C7", p.K)
    assert iv.elements == tuple(f"C{i}" for i in range(8))
    assert order_interval(s, p, "C7", "C0", p.K).elements == iv.elements[::-1]


def test_order_interval_reverses_everywhere(schottky2):
    s, p = schottky2.system, schottky2.params
    for X in s.vertices[:6]:
        for Z in s.vertices:
            if X != Z:
                a = order_interval(s, p, X, Z, p.theta).elements
                b = order_interval(s, p, Z, X, p.theta).elements
                assert a == b[::-1]


def test_order_inconsistency_carries_triple():
    # A cyclic comparator on three members between X and Z
    entries = {}
    names = ["X", "Z", "P", "Q", "R"]
    for y in "PQR":
        entries[(y, "X", "Z")] = 50
    entries[("P", "X", "Q")] = 5
    entries[("Q", "X", "R")] = 5
    entries[("R", "X", "P")] = 5
    s = TabularSystem.from_entries(names, 1.0, entries)
    p = CoreParams.derive(1.0)
    with pytest.raises(OrderError) as err:
        order_interval(s, p, "X", "Z", p.theta)
    assert len(err.value.triple) == 3


# ---------------------------------------------------------------- guards and barriers


def test_everything_is_a_guard_without_large_projections():
    s = TabularSystem.from_entries("ABCD", 1.0, {})
    p = CoreParams.derive(1.0)
    assert all(is_guard(s, p, W, Y, p.K) for W in "ABCD" for Y in "ABCD" if W != Y)


def test_extreme_members_are_guards(chain):
    s, p = chain.system, chain.params
    checked = 0
    for i in range(8):
        for j in range(8):
            if abs(i - j) < 2:
                continue
            X, Z = f"C{i}", f"C{j}"
            members = order_interval(s, p, X, Z, p.K / 2).interior
            assert members
            assert is_guard(s, p, members[-1], Z, p.K)
            assert is_guard(s, p, members[0], X, p.K)
            checked += 1
    assert checked == 42


def test_guard_matches_definition_by_enumeration(schottky2):
    s, p = schottky2.system, schottky2.params
    d = s.modified_table
    n = s.n
    for iw in range(0, n, 3):
        for iy in range(n):
            if iw == iy:
                continue
            ok = True
            for ix in range(n):
                if ix in (iw, iy) or not d[iw, ix, iy] > p.theta:
                    continue
                for iz in range(n):
                    if iz not in (ix, iy, iw) and d[iz, ix, iy] > p.K and not d[iz, ix, iw] > s.xi:
                        ok = False
            assert is_guard(s, p, s.vertices[iw], s.vertices[iy], p.K) == ok


def test_self_guard_rejected(chain):
    with pytest.raises(ValueError):
        is_guard(chain.system, chain.params, "C1", "C1", chain.params.K)


def test_barrier_single_vertex_path(chain):
    s, p = chain.system, chain.params
    assert is_barrier(s, p, "C3", ["C0"], "C7")
    assert not is_barrier(s, p, "C3", ["C5"], "C7")


def test_barrier_for_path_before_target(chain):
    s, p = chain.system, chain.params
    path = ["C0", "C1", "C2"]
    assert is_barrier(s, p, "C4", path, "C7")
    d = s.modified_table
    iz = s.ix("C7")
    for a in path:
        for b in path:
            if a != b:
                assert d[iz, s.ix(a), s.ix(b)] < p.theta


def test_barrier_target_on_path_rejected(chain):
    with pytest.raises(ValueError):
        is_barrier(chain.system, chain.params, "C3", ["C0", "C7"], "C7")


def test_find_barrier_single_vertex_is_greatest(chain):
    s, p = chain.system, chain.params
    w = find_barrier(s, p, chain.complex, ["C0"], "C7")
    assert w == order_interval(s, p, "C0", "C7", p.K / 2).interior[-1]


def test_find_barrier_along_walk(chain):
    s, p = chain.system, chain.params
    path = ["C0", "C1", "C2", "C3", "C2", "C1"]
    w, guards = find_barrier(s, p, chain.complex, path, "C7", return_chain=True)
    assert is_barrier(s, p, w, path, "C7")
    assert len(guards) == len(path)


def test_find_barrier_precondition(chain):
    with pytest.raises(ValueError):
        find_barrier(chain.system, chain.params, chain.complex, ["C5"], "C7")


def test_find_barrier_reports_small_K():
    # nothing large anywhere: no guard exists
    s = TabularSystem.from_entries([f"V{i}" for i in range(6)], 1.0, {})
    p = CoreParams.derive(1.0)
    c = build_complex(s, p)
    with pytest.raises((BarrierError, ValueError)):
        find_barrier(s, p, c, ["V0"], "V5")


# ---------------------------------------------------------------- the property sweep


def _by_tag(checks):
    return {c.tag: c for c in checks}


def test_theorem_main_on_schottky(schottky2):
    checks = _by_tag(check_theorem_main(schottky2.system, schottky2.params))
    for tag in ("d.symmetry", "d.quasi-equal", "d.behrstock", "d.monotonicity", "d.order",
                "d.barrier"):
        assert checks[tag].status == "pass", checks[tag].line()
    assert checks["d.coarse-triangle"].status in ("pass", "flag")


def test_counterexample_breaks_raw_monotonicity_only():
    s = monotonicity_counterexample()
    p = CoreParams.derive(s.xi)
    raw = _by_tag(check_theorem_main(s, p, mode="raw"))
    mod = _by_tag(check_theorem_main(s, p))
    assert raw["raw.monotonicity"].violations > 0
    assert mod["d.monotonicity"].violations == 0
    geo = MONOTONICITY_COUNTEREXAMPLE
    assert set(geo) == set(s.vertices)


def test_auto_K_returns_consistent_orders(schottky2):
    p, history = auto_K(schottky2.system, schottky2.params)
    assert history[-1] == (p.K, True)
    assert p.Kprime == 5 * p.K + 30 * p.xi


def test_auto_K_doubles_past_inconsistency():
    entries = {}
    names = ["X", "Z", "P", "Q", "R"]
    for y in "PQR":
        entries[(y, "X", "Z")] = 50
    entries[("P", "X", "Q")] = 5
    entries[("Q", "X", "R")] = 5
    entries[("R", "X", "P")] = 5
    s = TabularSystem.from_entries(names, 1.0, entries)
    p, history = auto_K(s, CoreParams.derive(1.0, K=10.0))
    assert not history[0][1]
    assert p.K > 50
    assert math.isclose(p.K, history[-1][0])
