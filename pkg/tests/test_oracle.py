from fractions import Fraction

import pytest

from lsopi.engine import classify, construct_H_case_II, prolong_with_column
from lsopi.fixtures import brunovsky, chained_form, double_chain_with_product, pomet_form, synthetic
from lsopi.geometry import Distribution, Filtration, characteristic_distribution, lie_bracket
from lsopi.oracle import (
    brute_force_lsop,
    default_ratio_grid,
    h_candidate_search,
    pointwise_bracket,
    pointwise_characteristic,
    same_span,
)
from lsopi.symcore import Expr, Point


def test_pointwise_bracket_matches_symbolic():
    S = double_chain_with_product()
    F = Filtration(S)
    V, W = F.ad(2, 1), F.ad(2, 2)
    for p in F.smp.points(S.states, 5):
        assert pointwise_bracket(V, W, p) == lie_bracket(V, W).evaluate(p)


def test_characteristic_of_involutive_distribution_is_itself():
    S = brunovsky(3, 1)
    D = Filtration(S).D(1)
    p = next(iter(D.smp.points(S.states, 1)))
    assert same_span(pointwise_characteristic(D, p), [g.evaluate(p) for g in D.basis()])


def test_characteristic_of_chained_form():
    S = chained_form()
    D = Filtration(S).D(0).plus_brackets()
    for p in D.smp.points(S.states, 3):
        assert same_span(pointwise_characteristic(D, p), [[0, 0, 0, 1]])


def test_characteristic_matches_engine_on_fixture():
    D = Filtration(synthetic("C3")).D(0).plus_brackets()
    C = characteristic_distribution(D)
    for p in D.smp.points(D.vars, 5):
        assert same_span(pointwise_characteristic(D, p), [b.evaluate(p) for b in C.basis()])


def test_grid_has_point_at_infinity():
    grid = default_ratio_grid()
    assert len(grid) == 202
    assert (Fraction(1), Fraction(0)) in grid
    assert len(set(grid)) == len(grid)


def test_h_search_needs_three_points():
    F = Filtration(pomet_form())
    with pytest.raises(ValueError):
        h_candidate_search(F, 0, list(F.smp.points(F.sys.states, 2)))


def _pomet_sigma1():
    S = pomet_form()
    z = Expr.constant(0, S.states)
    return prolong_with_column(S, z, z + 1, "u10")[0]


def test_h_search_pomet_empty():
    F = Filtration(_pomet_sigma1())
    assert h_candidate_search(F, 1, list(F.smp.points(F.sys.states, 3))) == []


def test_h_search_case_III_has_many_survivors():
    F = Filtration(double_chain_with_product())
    hits = h_candidate_search(F, 2, list(F.smp.points(F.sys.states, 3)))
    assert len(hits) >= 2
    F = Filtration(synthetic("C1_k1"))
    assert len(h_candidate_search(F, 1, list(F.smp.points(F.sys.states, 3)))) >= 2


def test_h_search_case_II_at_most_one():
    for name in ("IIB_ok", "IIB_B3_fails", "IIA_ok", "IIA_A2_fails", "IIA_A4_fails"):
        F = Filtration(synthetic(name))
        k = F.index()
        assert len(h_candidate_search(F, k, list(F.smp.points(F.sys.states, 3)))) <= 1, name


def test_brute_force_witnesses():
    w = brute_force_lsop(pomet_form(), 3)
    assert w is not None and len(w) == 3 and w.controls() == [1, 1, 1]
    w = brute_force_lsop(chained_form(), 2)
    assert len(w) == 2 and w.controls() == [1, 1]
    w = brute_force_lsop(brunovsky(2, 2), 0)
    assert len(w) == 0 and w.rho == 1
    assert brute_force_lsop(pomet_form(), 2) is None


def test_witness_replays():
    w = brute_force_lsop(chained_form(), 2)
    S = chained_form()
    for i, (label, (b21, b22)) in enumerate(w.path):
        S, _ = prolong_with_column(S, Expr.constant(int(b21), S.states), Expr.constant(int(b22), S.states), f"z{i}")
    assert S.describe() == w.system.describe()
