import random
from fractions import Fraction

from lsopi.fixtures import brunovsky, chained_form, chained_form_rescaled, double_chain_with_product, pomet_form
from lsopi.geometry import (
    ControlAffineSystem,
    Distribution,
    Filtration,
    VectorField,
    characteristic_distribution,
    corank,
    growth_vector,
    involutive_closure,
    is_involutive,
    is_sfl,
    lie_bracket,
    linearizability_sequence,
    non_involutivity_index,
)
from lsopi.engine import prolong_with_column
from lsopi.symcore import Expr, parse_expr

X = ("x1", "x2", "x3", "x4")


def vf(*texts, vars=X):
    return VectorField.parse(list(texts), vars)


def test_coordinate_bracket():
    assert lie_bracket(vf("1", "0", "0", "0"), vf("0", "x1", "0", "0")) == vf("0", "1", "0", "0")


def test_chained_form_bracket():
    S = chained_form()
    assert lie_bracket(S.g1, S.g2) == vf("0", "0", "-1", "0")


def test_prolonged_drift_bracket():
    S = chained_form_rescaled("1")
    v = S.states
    assert lie_bracket(S.f, S.g1) == chained_form().g1.lift(v).scale(-1)


def test_sequences():
    S = chained_form()
    seq = linearizability_sequence(S, 2)
    # no drift: ad_f g vanishes, the filtration is stuck at D0
    assert [D.rank for D in seq[:2]] == [2, 2]
    assert non_involutivity_index(seq) == 0
    P1 = Filtration(chained_form_rescaled("1"))
    assert [P1.D(0).rank, P1.D(1).rank] == [2, 4]
    B = linearizability_sequence(brunovsky(2, 2), 2)
    assert [D.rank for D in B[:2]] == [2, 4]
    assert all(is_involutive(D) for D in B)
    assert non_involutivity_index(B) is None
    E = linearizability_sequence(double_chain_with_product(), 3)
    assert E[2].rank == 6
    assert [is_involutive(D) for D in E[:3]] == [True, True, False]
    assert non_involutivity_index(E) == 2


def test_example_two_filtration_generators():
    F = Filtration(double_chain_with_product())
    vars = F.sys.states
    D2 = F.D(2)
    expected = F.D(1).plus([VectorField.coordinate("x11", vars), vf("x11", "0", "0", "0", "1", "0", "0", vars=vars)])
    assert D2.equals(expected)


def test_rank_one_is_involutive():
    D = Distribution([vf("x2", "x1^2", "1", "x3")], X)
    assert is_involutive(D)


def test_closures():
    S = chained_form()
    D0 = Filtration(S).D(0)
    assert growth_vector(D0) == [2, 3, 4]
    assert involutive_closure(D0).rank == 4
    Dinv = Distribution([S.g2], X)
    assert involutive_closure(Dinv).rank == 1
    assert growth_vector(Dinv) == [1]
    F2 = Filtration(double_chain_with_product())
    assert involutive_closure(F2.D(2)).rank == 7


def test_characteristic_of_chained_form():
    S = chained_form()
    D0 = Filtration(S).D(0)
    C = characteristic_distribution(D0.plus_brackets())
    assert C.rank == 1
    assert C.contains(vf("0", "0", "0", "1"))
    Dinv = Distribution([S.g2, vf("0", "0", "1", "0")], X)
    assert characteristic_distribution(Dinv).equals(Dinv)


def test_coranks():
    S = chained_form()
    D0 = Filtration(S).D(0)
    assert corank(D0, D0) == 0
    assert corank(D0, D0.plus_brackets()) == 1
    P1, _ = prolong_with_column(pomet_form(), Expr.constant(0, X), Expr.constant(1, X), "u10")
    F1 = Filtration(P1)
    assert corank(F1.D(0), F1.D(1)) == 2
    assert growth_vector(Filtration(pomet_form()).D(0)) == [2, 3, 4]


def test_is_sfl():
    assert is_sfl(brunovsky(2, 2)) == (True, 1)
    assert is_sfl(chained_form())[0] is False
    S = pomet_form()
    for i in range(3):
        S, _ = prolong_with_column(S, Expr.constant(0, S.states), Expr.constant(1, S.states), f"w{i}")
    assert is_sfl(S)[0]


def _rand_field(rng, vars):
    def poly():
        if rng.random() < 0.3:
            return "0"
        return " + ".join(
            "*".join([str(rng.randint(-2, 2))] + [rng.choice(vars) for _ in range(rng.randint(0, 2))])
            for _ in range(rng.randint(1, 2))
        )

    return VectorField.parse([poly() for _ in vars], vars)


def test_involutivity_on_generators_matches_combinations():
    # brackets of function combinations stay in D exactly when generator brackets do
    rng = random.Random(8)
    for _ in range(15):
        a, b = _rand_field(rng, X), _rand_field(rng, X)
        D = Distribution([a, b], X)
        if D.rank < 2:
            continue
        c1, c2 = parse_expr("x1 + 2", X), parse_expr("x2*x3 - 1", X)
        u, w = a.scale(c1) + b, b.scale(c2) - a
        assert D.contains(lie_bracket(u, w)) == is_involutive(D)


def test_feedback_invariance_of_filtration():
    rng = random.Random(21)
    S = double_chain_with_product()
    vars = S.states
    F0 = Filtration(S)
    for _ in range(3):
        b = [parse_expr(f"{rng.randint(1, 3)} + {v}^2", vars) for v in rng.sample(vars, 2)]
        a = [parse_expr(f"{rng.randint(-3, 3)}*{v}", vars) for v in rng.sample(vars, 2)]
        off = parse_expr(rng.choice(vars), vars)
        g1 = S.g1.scale(b[0])
        g2 = S.g2.scale(b[1]) + S.g1.scale(off)
        f = S.f + S.g1.scale(a[0]) + S.g2.scale(a[1])
        F1 = Filtration(ControlAffineSystem(vars, f, g1, g2))
        for j in range(3):
            assert F1.D(j).equals(F0.D(j))


def test_growth_vector_monotone():
    rng = random.Random(13)
    for _ in range(20):
        D = Distribution([_rand_field(rng, X) for _ in range(2)], X)
        gv = growth_vector(D)
        assert all(a <= b for a, b in zip(gv, gv[1:]))
        assert gv[-1] <= 4
