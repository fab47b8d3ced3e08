"""Tests for the exact boolean/expression layer."""

import random
from fractions import Fraction

from qsymb.bexp import (
    FALSE,
    TRUE,
    Add,
    And,
    BLit,
    Cmp,
    Imp,
    Lit,
    Mul,
    Not,
    Or,
    Sub,
    Var,
    band,
    bimp,
    bnot,
    bor,
    canonicalize,
    conj,
    disj,
    eq,
    equivalent,
    eval_bexp,
    eval_exp,
    fv_bexp,
    fv_exp,
    implies,
    lit,
    pp_bexp,
    satisfiable,
    subst_bexp,
    subst_exp,
    valid,
)

F = Fraction
DOMS = {
    "x": (F(0), F(1), F(2), F(3)),
    "y": (F(0), F(1)),
    "z": (F(0), F(1), F(2)),
}


def test_eval_exp_exact():
    e = Add(Mul(Var("x"), lit("1/3")), Sub(lit(2), Var("y")))
    assert eval_exp({"x": F(3), "y": F(1, 2)}, e) == F(5, 2)


def test_eval_bexp_comparisons():
    psi = {"x": F(2), "y": F(2)}
    assert eval_bexp(psi, Cmp("=", Var("x"), Var("y")))
    assert not eval_bexp(psi, Cmp("<", Var("x"), Var("y")))
    assert eval_bexp(psi, Cmp("<=", Var("x"), Var("y")))
    assert eval_bexp(psi, Cmp(">=", Var("x"), lit(1)))
    assert eval_bexp(psi, Imp(Cmp(">", Var("x"), lit(5)), FALSE))


def test_free_vars():
    e = Add(Var("x"), Mul(lit(2), Var("y")))
    assert fv_exp(e) == {"x", "y"}
    b = And(Cmp("=", Var("x"), lit(0)), Not(Cmp("<", Var("z"), Var("x"))))
    assert fv_bexp(b) == {"x", "z"}
    assert fv_bexp(TRUE) == frozenset()


def test_substitution():
    e = Add(Var("x"), Var("y"))
    assert subst_exp(e, {"x": lit(1)}) == Add(lit(1), Var("y"))
    b = Cmp("=", Var("x"), Var("y"))
    assert subst_bexp(b, {"y": Var("x")}) == Cmp("=", Var("x"), Var("x"))


def test_smart_constructors_fold():
    p = Cmp("=", Var("x"), lit(0))
    assert band(TRUE, p) == p
    assert band(p, FALSE) == FALSE
    assert bor(p, TRUE) == TRUE
    assert bor(FALSE, p) == p
    assert bnot(TRUE) == FALSE
    assert bnot(Not(p)) == p
    assert bimp(FALSE, p) == TRUE
    assert bimp(TRUE, p) == p
    assert conj([]) == TRUE
    assert disj([]) == FALSE
    assert eq(Var("x"), Var("x")) == TRUE


def test_satisfiable_valid():
    p = Cmp("=", Var("x"), lit(0))
    assert satisfiable(p, DOMS)
    assert not valid(p, DOMS)
    assert valid(Or(p, Not(p)), DOMS)
    assert not satisfiable(And(p, Not(p)), DOMS)
    assert valid(TRUE, DOMS)
    assert not satisfiable(FALSE, DOMS)


def test_implies_preorder():
    p = Cmp("<", Var("x"), lit(2))
    q = Cmp("<", Var("x"), lit(3))
    assert implies(p, q, DOMS)
    assert not implies(q, p, DOMS)
    assert implies(p, p, DOMS)
    # transitivity on a chain
    r = Cmp("<=", Var("x"), lit(3))
    assert implies(q, r, DOMS)
    assert implies(p, r, DOMS)


def test_implies_across_variable_sets():
    # b1 mentions x only, b2 mentions y only: implication must quantify both
    p = Cmp("=", Var("x"), lit(0))
    q = Cmp("=", Var("y"), lit(0))
    assert not implies(p, q, DOMS)
    assert implies(FALSE, q, DOMS)
    assert implies(And(p, q), q, DOMS)


def test_canonicalize_degenerate():
    p = Cmp("=", Var("y"), lit(0))
    assert canonicalize(Or(p, Not(p)), DOMS) == TRUE
    assert canonicalize(And(p, Not(p)), DOMS) == FALSE
    assert canonicalize(TRUE, DOMS) == TRUE


def test_canonicalize_equivalent_and_stable():
    b = Or(
        Cmp("=", Var("x"), lit(1)),
        And(Cmp("<", Var("x"), lit(1)), Cmp("=", Var("y"), lit(0))),
    )
    c = canonicalize(b, DOMS)
    assert equivalent(b, c, DOMS)
    assert canonicalize(c, DOMS) == c


def _random_bexp(rng, depth):
    if depth == 0 or rng.random() < 0.3:
        name = rng.choice(["x", "y", "z"])
        val = rng.choice(DOMS[name])
        op = rng.choice(["=", "<", "<=", ">", ">="])
        return Cmp(op, Var(name), Lit(val))
    kind = rng.randrange(4)
    if kind == 0:
        return Not(_random_bexp(rng, depth - 1))
    ctor = [And, Or, Imp][kind - 1]
    return ctor(_random_bexp(rng, depth - 1), _random_bexp(rng, depth - 1))


def test_canonicalize_random_roundtrip():
    rng = random.Random(7)
    for _ in range(60):
        b = _random_bexp(rng, 3)
        c = canonicalize(b, DOMS)
        assert equivalent(b, c, DOMS)


def test_implies_matches_truth_tables():
    rng = random.Random(11)
    from qsymb.bexp import assignments

    for _ in range(40):
        b1 = _random_bexp(rng, 2)
        b2 = _random_bexp(rng, 2)
        names = fv_bexp(b1) | fv_bexp(b2)
        expected = all(
            eval_bexp(a, b2) for a in assignments(DOMS, names) if eval_bexp(a, b1)
        )
        assert implies(b1, b2, DOMS) == expected


def test_pp_parseable_shapes():
    b = Imp(And(Cmp("=", Var("x"), lit(0)), TRUE), Not(Cmp("<", Var("y"), lit(1))))
    s = pp_bexp(b)
    assert "x = 0" in s and "->" in s and "not" in s


def test_blit_identity():
    assert TRUE == BLit(True)
    assert FALSE == BLit(False)
    assert TRUE != FALSE
