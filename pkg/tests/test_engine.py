import pytest

from lsopi import engine
from lsopi.engine import (
    NO_RATIONAL_H,
    CaseLabel,
    LsopiDistribution,
    ProlongationError,
    affinize,
    special_H_conditions,
    special_H_forced,
    build_prolongation,
    canonical_H,
    classify,
    construct_H_case_II,
    construct_H_case_III,
    extract_beta_column,
    find_tilde_g2,
    flatness_necessary_check,
    prolong_with_column,
    prolongation_problems,
    run_lsopi,
    validate_lsopi,
)
from lsopi.fixtures import (
    SYNTHETIC,
    brunovsky,
    chained_form,
    chained_form_rescaled,
    double_chain_with_product,
    pomet_form,
    synthetic,
    uncontrollable,
)
from lsopi.geometry import Filtration, VectorField, is_sfl
from lsopi.oracle import h_candidate_search
from lsopi.symcore import Expr, evaluate, parse_expr


def filt_of(S):
    F = Filtration(S)
    return F, F.index()


def step0(S):
    F, k = filt_of(S)
    return F, k, classify(F, k)


def pomet_after_one():
    S = pomet_form()
    z = Expr.constant(0, S.states)
    return prolong_with_column(S, z, z + 1, "u10")[0]


EXPECTED_LABELS = {
    "C1_k1": "III_C1",
    "C2_k0": "III_C2",
    "C3": "III_C3",
    "C4": "III_C4",
    "C4_drift": "III_C4",
    "C5_prime": "III_C5_PRIME",
    "C6": "III_C6",
    "C5pp_alpha": "III_C5_DOUBLE_PRIME",
    "C5pp_alpha0": "III_C5_DOUBLE_PRIME",
    "C5pp_permuted": "III_C5_DOUBLE_PRIME",
    "C5pp_C5a": "III_C5_DOUBLE_PRIME",
    "C5pp_k1_permuted": "III_C5_DOUBLE_PRIME",
    "C5pp_k1_alpha": "III_C5_DOUBLE_PRIME",
    "C5pp_k1_r1_side": "III_C5_DOUBLE_PRIME",
    "C5pp_k1_r1_noside": "III_C5_DOUBLE_PRIME",
    "IIB_ok": "II_B",
    "IIB_B3_fails": "II_B",
    "IIA_ok": "II_A",
    "IIA_A2_fails": "II_A",
    "IIA_A4_fails": "II_A",
}


@pytest.mark.parametrize("name", sorted(EXPECTED_LABELS))
def test_synthetic_labels(name):
    assert set(EXPECTED_LABELS) <= set(SYNTHETIC)
    _, _, cls = step0(synthetic(name))
    assert cls.label.value == EXPECTED_LABELS[name]


def test_reference_labels():
    assert step0(pomet_form())[2].label is CaseLabel.III_C2
    F, k, cls = step0(pomet_after_one())
    assert (k, cls.label, cls.r) == (1, CaseLabel.II_B, 1)
    F, k, cls = step0(double_chain_with_product())
    assert (k, cls.label) == (2, CaseLabel.III_C1)
    assert cls.closure_rank == 7


def test_case_II_none_for_pomet():
    F, k, cls = step0(pomet_after_one())
    notes = []
    assert construct_H_case_II(F, cls, notes) is None
    assert any(n.startswith("no LSOPI-distribution") for n in notes)


def test_case_IIB_builds_the_unique_H():
    F, k, cls = step0(synthetic("IIB_ok"))
    L = construct_H_case_II(F, cls, [])
    assert L is not None
    assert L.H.rank == 2 * k + 1 and L.H.is_involutive()
    assert validate_lsopi(F, k, L.H, L.xi) == []
    pts = list(F.smp.points(F.sys.states, 3))
    hits = h_candidate_search(F, k, pts)
    b21, b22 = (evaluate(x, pts[0]) for x in L.beta)
    assert len(hits) == 1
    r1, r2 = hits[0]
    assert r1 * b22 == r2 * b21


@pytest.mark.parametrize("name, failing", [("IIA_A2_fails", "A2"), ("IIA_A4_fails", "A4"), ("IIB_B3_fails", "B3")])
def test_case_II_failing_conditions(name, failing):
    F, k, cls = step0(synthetic(name))
    notes = []
    assert construct_H_case_II(F, cls, notes) is None
    assert f"no LSOPI-distribution: {failing} fails" in notes
    # the pointwise test is first order only, so at most the failing candidate survives
    pts = list(F.smp.points(F.sys.states, 3))
    assert len(h_candidate_search(F, k, pts)) <= 1


def test_case_IIA_success():
    F, k, cls = step0(synthetic("IIA_ok"))
    assert cls.r == 2 and cls.r_II == 1
    L = construct_H_case_II(F, cls, [])
    assert L is not None and validate_lsopi(F, k, L.H, L.xi) == []


def test_case_III_C2_on_pomet():
    F, k, cls = step0(pomet_form())
    L = construct_H_case_III(F, cls, [])
    assert L.H.equals(F.D(-1).plus([VectorField.coordinate("x4", F.sys.states)]))
    assert [str(b) for b in L.beta] == ["0", "1"]
    new, control = build_prolongation(F, L, "u10")
    assert control == "u1"
    assert new.n == 5
    assert new.describe() == pomet_after_one().describe()


def test_case_III_C1_example_two():
    F, k, cls = step0(double_chain_with_product())
    L = construct_H_case_III(F, cls, [])
    new, _ = build_prolongation(F, L, "p")
    assert is_sfl(new)[0]


@pytest.mark.parametrize("name", ["C3", "C4", "C5_prime", "C6"])
def test_case_III_without_H(name):
    F, k, cls = step0(synthetic(name))
    notes = []
    assert construct_H_case_III(F, cls, notes) is None


def test_find_tilde_g2_variants():
    F, k, cls = step0(synthetic("C5pp_alpha0"))
    tilde, alpha, permuted = find_tilde_g2(F, cls)
    assert alpha.is_zero() and not permuted and tilde == F.sys.g2
    F, k, cls = step0(synthetic("C5pp_alpha"))
    tilde, alpha, permuted = find_tilde_g2(F, cls)
    assert alpha == parse_expr("x4/(2*x3^2)", F.sys.states)
    assert tilde == F.sys.g2 - F.sys.g1.scale(alpha)
    assert cls.closure.contains(F.ad_of(k + 1, tilde))
    F, k, cls = step0(synthetic("C5pp_permuted"))
    tilde, alpha, permuted = find_tilde_g2(F, cls)
    assert permuted and tilde == F.sys.g1
    F, k, cls = step0(synthetic("C5pp_k1_alpha"))
    _, alpha, _ = find_tilde_g2(F, cls)
    assert alpha == parse_expr("a1/(a2 + 1)", F.sys.states)


def test_tilde_g2_is_a_round_trip_on_a_feedback_twin():
    # g2 -> g2 + x1 g1 moves alpha by x1 and leaves the tilde direction alone
    S = synthetic("C5pp_alpha0")
    x1 = Expr.variable("x1", S.states)
    twin = S.replace(g2=S.g2 + S.g1.scale(x1))
    F, k, cls = step0(twin)
    tilde, alpha, _ = find_tilde_g2(F, cls)
    assert alpha == x1
    assert tilde == S.g2


def test_special_H_conditions():
    F, k, cls = step0(synthetic("C5pp_C5a"))
    A = special_H_conditions(F, cls, find_tilde_g2(F, cls)[0])
    assert A["C5a"] and A["C5b"]
    F, k, cls = step0(synthetic("C5pp_alpha0"))
    A = special_H_conditions(F, cls, find_tilde_g2(F, cls)[0])
    assert not A["C5a"] and A["C5b"]
    F, k, cls = step0(synthetic("C5pp_k1_alpha"))
    A = special_H_conditions(F, cls, find_tilde_g2(F, cls)[0])
    assert A["C5b"] and A["E"].is_involutive()


@pytest.mark.parametrize(
    "name, expected",
    [
        ("C5pp_k1_alpha", (0, True, False)),
        ("C5pp_k1_permuted", (0, True, False)),
        ("C5pp_k1_r1_side", (1, True, True)),
        ("C5pp_k1_r1_noside", (1, False, False)),
    ],
)
def test_special_H_forced(name, expected):
    F, k, cls = step0(synthetic(name))
    assert k == 1
    assert special_H_forced(F, k, find_tilde_g2(F, cls)[0]) == expected


def test_C5pp_policy_notes():
    F, k, cls = step0(synthetic("C5pp_k1_r1_side"))
    notes = []
    L = construct_H_case_III(F, cls, notes)
    assert L.special and L.forced
    F, k, cls = step0(synthetic("C5pp_k1_alpha"))
    notes = []
    L = construct_H_case_III(F, cls, notes)
    assert L.special and not L.forced
    assert any("(not forced)" in n for n in notes)


def test_C5pp_fallback_when_E_fails(monkeypatch):
    real = engine.special_H_conditions

    def broken(filt, cls, tilde):
        out = real(filt, cls, tilde)
        out["C5b"] = False
        return out

    monkeypatch.setattr(engine, "special_H_conditions", broken)
    F, k, cls = step0(synthetic("C5pp_k1_alpha"))
    notes = []
    L = construct_H_case_III(F, cls, notes)
    assert L is not None and not L.forced and "non-forced canonical H" in notes
    F, k, cls = step0(synthetic("C5pp_k1_r1_side"))
    notes = []
    assert construct_H_case_III(F, cls, notes) is None
    assert "no LSOPI-distribution: the special choice is forced and fails" in notes


def test_no_rational_H_makes_run_inconclusive(monkeypatch):
    def none(filt, k, notes):
        notes.append(NO_RATIONAL_H)
        return None

    monkeypatch.setattr(engine, "canonical_H", none)
    v = run_lsopi(double_chain_with_product())
    assert v.kind == "INCONCLUSIVE" and not v.conclusive


def test_beta_column_chained_form():
    F, k, cls = step0(chained_form())
    L = construct_H_case_III(F, cls, [])
    assert [str(b) for b in extract_beta_column(F, k, L.H)] == ["0", "1"]


def test_beta_column_for_parametrised_H():
    S = chained_form_rescaled("1 + x2^2")
    F, k = filt_of(S)
    v = S.states
    # H = D0 + span{alpha1 gbar + alpha2 d/dx3} with alpha = (1, x3)
    gbar = VectorField.parse(["1", "x3", "0", "0", "0"], v)
    xi = gbar + VectorField.coordinate("x3", v).scale(parse_expr("x3", v))
    H = F.D(0).plus([xi])
    b21, b22 = extract_beta_column(F, k, H)
    # the closed form, with dgamma/dx4 = 0
    assert b21 == 1
    assert b22 == parse_expr("(x3 - x4)/u0", v)


def test_beta_column_for_ad_g2():
    F, k, cls = step0(synthetic("IIB_ok"))
    H = F.D(k - 1).plus([F.ad(k, 2)])
    if H.is_involutive():
        b = extract_beta_column(F, k, H)
        assert b[0].is_zero()


def test_build_prolongation_of_chained_form():
    F, k, cls = step0(chained_form())
    L = construct_H_case_III(F, cls, [])
    new, control = build_prolongation(F, L, "u0")
    assert control == "u1"
    assert new.describe() == chained_form_rescaled("1").describe()
    assert prolongation_problems(F, L, new) == []


def test_build_prolongation_rejects_bad_column():
    F, k, cls = step0(synthetic("IIB_ok"))
    L = construct_H_case_II(F, cls, [])
    one, zero = Expr.constant(1, F.sys.states), Expr.constant(0, F.sys.states)
    other = (one, zero) if L.beta[0].is_zero() else (zero, one)
    with pytest.raises(ProlongationError):
        build_prolongation(F, LsopiDistribution(L.H, k, other, L.xi), "p")


def test_new_D0_is_involutive():
    for name in ("C1_k1", "IIB_ok"):
        F, k, cls = step0(synthetic(name))
        L = (construct_H_case_II if cls.label.is_case_II else construct_H_case_III)(F, cls, [])
        new, _ = build_prolongation(F, L, "p")
        assert Filtration(new).D(0).is_involutive()


def test_affinize():
    states, controls = ("x", "y", "c"), ("v", "w")
    allv = states + controls
    F = [parse_expr(t, allv) for t in ("v*(1 - c^2)/(1 + c^2)", "2*v*c/(1 + c^2)", "w*v")]
    S = affinize(states, controls, F)
    assert S.n == 5
    assert S.g1 == VectorField.coordinate("v", S.states)
    assert S.g2 == VectorField.coordinate("w", S.states)
    assert all(e.is_zero() for e in S.f.comps[3:])
    base = chained_form()
    Fa = [e.lift(base.states + controls) for e in base.g1.comps]
    u1 = Expr.variable("v", base.states + controls)
    u2 = Expr.variable("w", base.states + controls)
    Fa = [a * u1 + b.lift(base.states + controls) * u2 for a, b in zip(Fa, base.g2.comps)]
    S2 = affinize(base.states, controls, Fa)
    assert S2.n == 6
    with pytest.raises(ValueError):
        affinize(("x",), ("v", "w"), [parse_expr("v + w", ("x", "v", "w"))])


def test_flatness_necessary_check():
    F, k = filt_of(synthetic("corank_k1"))
    assert flatness_necessary_check(F, k) is not None
    F, k = filt_of(chained_form())
    assert flatness_necessary_check(F, k) is None
    F, k, cls = step0(synthetic("C4"))
    assert flatness_necessary_check(F, k, cls.label) is not None


def test_run_lsopi_verdicts():
    v = run_lsopi(chained_form())
    assert (v.kind, v.ell) == ("LSOPI", 2)
    v = run_lsopi(pomet_form())
    assert (v.kind, v.failing_step, v.reason) == ("NOT_LSOPI", 1, "no LSOPI-distribution")
    assert v.steps[1].case == "II_B" and v.steps[1].r == 1
    assert (run_lsopi(brunovsky(2, 2)).kind, run_lsopi(brunovsky(2, 2)).ell) == ("LSOPI", 0)
    assert run_lsopi(uncontrollable()).kind == "NOT_FLAT"


def test_step_cap_is_an_internal_error():
    with pytest.raises(ProlongationError):
        run_lsopi(chained_form(), max_steps=1)


def test_index_strictly_increases_along_the_run():
    for name in ("C2_k0", "IIB_ok", "C1_k1"):
        v = run_lsopi(synthetic(name))
        ks = [s.k for s in v.steps if s.k is not None]
        assert ks == sorted(set(ks))


def test_canonical_H_is_deterministic():
    F, k, _ = step0(double_chain_with_product())
    a = canonical_H(F, k, [])
    F2, _, _ = step0(double_chain_with_product())
    b = canonical_H(F2, k, [])
    assert a.H.generator_strings() == b.H.generator_strings()
    assert [str(x) for x in a.beta] == [str(x) for x in b.beta]
