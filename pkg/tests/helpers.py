"""Shared numeric generators for the test suite."""

from __future__ import annotations

import numpy as np

from qsymb.quantum import SuperOp, dag


def random_kraus(rng: np.random.Generator, regs, n_ops: int = 3) -> SuperOp:
    """A random CP map, scaled so it is trace-nonincreasing."""
    d = 2 ** len(regs)
    ops = [rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)) for _ in range(n_ops)]
    s = sum(dag(k) @ k for k in ops)
    norm = np.sqrt(np.max(np.linalg.eigvalsh(s).real))
    return SuperOp(regs, [k / (norm * 1.0000001) for k in ops])


def random_channel(rng: np.random.Generator, regs, n_ops: int = 3) -> SuperOp:
    """A random trace-preserving CP map (Kraus sum normalised to identity)."""
    d = 2 ** len(regs)
    ops = [rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)) for _ in range(n_ops)]
    s = sum(dag(k) @ k for k in ops)
    vals, vecs = np.linalg.eigh(s)
    inv_sqrt = vecs @ np.diag(1.0 / np.sqrt(vals)) @ dag(vecs)
    return SuperOp(regs, [k @ inv_sqrt for k in ops])


def random_unitary(rng: np.random.Generator, d: int) -> np.ndarray:
    z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(z)
    return q @ np.diag(np.diag(r) / np.abs(np.diag(r)))


def random_term(rng, depth, cvars=("x", "y"), regs=("q", "r", "s")):
    """Random syntax tree for binding-structure tests; no resolved operators."""
    from fractions import Fraction

    from qsymb import syntax as st
    from qsymb.bexp import Add, Cmp, Lit, Var

    def rand_exp():
        k = rng.randrange(3)
        if k == 0:
            return Lit(Fraction(rng.randrange(3)))
        if k == 1:
            return Var(rng.choice(cvars))
        return Add(Var(rng.choice(cvars)), Lit(Fraction(rng.randrange(2))))

    def rand_action():
        k = rng.randrange(7)
        if k == 0:
            return st.Tau()
        if k == 1:
            return st.CIn("c", rng.choice(cvars), (Fraction(0), Fraction(1)))
        if k == 2:
            return st.COut("c", rand_exp())
        if k == 3:
            return st.QIn("@a", rng.choice(regs))
        if k == 4:
            return st.QOut("@a", rng.choice(regs))
        if k == 5:
            return st.SuperOpApp("X", (rng.choice(regs),))
        return st.Meas("M", (rng.choice(regs),), rng.choice(cvars))

    if depth == 0 or rng.random() < 0.25:
        return st.Nil()
    k = rng.randrange(6)
    if k in (0, 1):
        return st.Prefix(rand_action(), random_term(rng, depth - 1, cvars, regs))
    if k == 2:
        return st.Sum(
            random_term(rng, depth - 1, cvars, regs),
            random_term(rng, depth - 1, cvars, regs),
        )
    if k == 3:
        return st.Par(
            random_term(rng, depth - 1, cvars, regs),
            random_term(rng, depth - 1, cvars, regs),
        )
    if k == 4:
        return st.Restrict(random_term(rng, depth - 1, cvars, regs), frozenset(("c",)))
    return st.If(
        Cmp("=", Var(rng.choice(cvars)), Lit(Fraction(rng.randrange(2)))),
        random_term(rng, depth - 1, cvars, regs),
    )
