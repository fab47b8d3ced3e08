"""Classical expressions and boolean conditions over finite rational domains.

Everything here is exact: values are `fractions.Fraction`, and satisfiability,
validity and implication are decided by enumerating the declared domains of
the free variables. That is the whole point of requiring finite domains in
program files; guard reasoning never touches floating point.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Union

Rat = Fraction
Evaluation = dict[str, Fraction]
DomainMap = Mapping[str, tuple[Fraction, ...]]


# -- expressions -----------------------------------------------------------


class Exp:
    pass


@dataclass(frozen=True)
class Lit(Exp):
    value: Fraction


@dataclass(frozen=True)
class Var(Exp):
    name: str


@dataclass(frozen=True)
class Add(Exp):
    left: Exp
    right: Exp


@dataclass(frozen=True)
class Sub(Exp):
    left: Exp
    right: Exp


@dataclass(frozen=True)
class Mul(Exp):
    left: Exp
    right: Exp


def lit(v) -> Lit:
    return Lit(Fraction(v))


def eval_exp(psi: Mapping[str, Fraction], e: Exp) -> Fraction:
    match e:
        case Lit(v):
            return v
        case Var(name):
            if name not in psi:
                raise KeyError(f"unbound classical variable {name!r}")
            return psi[name]
        case Add(l, r):
            return eval_exp(psi, l) + eval_exp(psi, r)
        case Sub(l, r):
            return eval_exp(psi, l) - eval_exp(psi, r)
        case Mul(l, r):
            return eval_exp(psi, l) * eval_exp(psi, r)
    raise TypeError(f"not an expression: {e!r}")


def subst_exp(e: Exp, sub: Mapping[str, Exp]) -> Exp:
    match e:
        case Lit(_):
            return e
        case Var(name):
            return sub.get(name, e)
        case Add(l, r):
            return Add(subst_exp(l, sub), subst_exp(r, sub))
        case Sub(l, r):
            return Sub(subst_exp(l, sub), subst_exp(r, sub))
        case Mul(l, r):
            return Mul(subst_exp(l, sub), subst_exp(r, sub))
    raise TypeError(f"not an expression: {e!r}")


def fv_exp(e: Exp) -> frozenset[str]:
    match e:
        case Lit(_):
            return frozenset()
        case Var(name):
            return frozenset((name,))
        case Add(l, r) | Sub(l, r) | Mul(l, r):
            return fv_exp(l) | fv_exp(r)
    raise TypeError(f"not an expression: {e!r}")


# -- boolean expressions ---------------------------------------------------


class BExp:
    pass


@dataclass(frozen=True)
class BLit(BExp):
    value: bool


@dataclass(frozen=True)
class Cmp(BExp):
    op: str  # one of = < <= > >=
    left: Exp
    right: Exp


@dataclass(frozen=True)
class Not(BExp):
    operand: BExp


@dataclass(frozen=True)
class And(BExp):
    left: BExp
    right: BExp


@dataclass(frozen=True)
class Or(BExp):
    left: BExp
    right: BExp


@dataclass(frozen=True)
class Imp(BExp):
    left: BExp
    right: BExp


TRUE = BLit(True)
FALSE = BLit(False)

_CMP = {
    "=": lambda a, b: a == b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def band(a: BExp, b: BExp) -> BExp:
    """Conjunction with constant folding; keeps generated guards small."""
    if a == FALSE or b == FALSE:
        return FALSE
    if a == TRUE:
        return b
    if b == TRUE:
        return a
    return And(a, b)


def bor(a: BExp, b: BExp) -> BExp:
    if a == TRUE or b == TRUE:
        return TRUE
    if a == FALSE:
        return b
    if b == FALSE:
        return a
    return Or(a, b)


def bnot(a: BExp) -> BExp:
    if isinstance(a, BLit):
        return BLit(not a.value)
    if isinstance(a, Not):
        return a.operand
    return Not(a)


def bimp(a: BExp, b: BExp) -> BExp:
    if a == FALSE or b == TRUE:
        return TRUE
    if a == TRUE:
        return b
    return Imp(a, b)


def conj(parts: Iterable[BExp]) -> BExp:
    out = TRUE
    for p in parts:
        out = band(out, p)
    return out


def disj(parts: Iterable[BExp]) -> BExp:
    out = FALSE
    for p in parts:
        out = bor(out, p)
    return out


def eq(l: Exp, r: Exp) -> BExp:
    if l == r:
        return TRUE
    return Cmp("=", l, r)


def eval_bexp(psi: Mapping[str, Fraction], b: BExp) -> bool:
    match b:
        case BLit(v):
            return v
        case Cmp(op, l, r):
            return _CMP[op](eval_exp(psi, l), eval_exp(psi, r))
        case Not(x):
            return not eval_bexp(psi, x)
        case And(l, r):
            return eval_bexp(psi, l) and eval_bexp(psi, r)
        case Or(l, r):
            return eval_bexp(psi, l) or eval_bexp(psi, r)
        case Imp(l, r):
            return (not eval_bexp(psi, l)) or eval_bexp(psi, r)
    raise TypeError(f"not a boolean expression: {b!r}")


def subst_bexp(b: BExp, sub: Mapping[str, Exp]) -> BExp:
    match b:
        case BLit(_):
            return b
        case Cmp(op, l, r):
            return Cmp(op, subst_exp(l, sub), subst_exp(r, sub))
        case Not(x):
            return bnot(subst_bexp(x, sub))
        case And(l, r):
            return band(subst_bexp(l, sub), subst_bexp(r, sub))
        case Or(l, r):
            return bor(subst_bexp(l, sub), subst_bexp(r, sub))
        case Imp(l, r):
            return bimp(subst_bexp(l, sub), subst_bexp(r, sub))
    raise TypeError(f"not a boolean expression: {b!r}")


def fv_bexp(b: BExp) -> frozenset[str]:
    match b:
        case BLit(_):
            return frozenset()
        case Cmp(_, l, r):
            return fv_exp(l) | fv_exp(r)
        case Not(x):
            return fv_bexp(x)
        case And(l, r) | Or(l, r) | Imp(l, r):
            return fv_bexp(l) | fv_bexp(r)
    raise TypeError(f"not a boolean expression: {b!r}")


# -- decision by enumeration ----------------------------------------------


def assignments(domains: DomainMap, names: Iterable[str]) -> Iterator[Evaluation]:
    """All total assignments of the named variables within their domains."""
    names = sorted(set(names))
    missing = [n for n in names if n not in domains]
    if missing:
        raise KeyError(f"no declared domain for variable(s) {missing}")
    for combo in itertools.product(*(domains[n] for n in names)):
        yield dict(zip(names, combo))


def satisfiable(b: BExp, domains: DomainMap) -> bool:
    return any(eval_bexp(psi, b) for psi in assignments(domains, fv_bexp(b)))


def valid(b: BExp, domains: DomainMap) -> bool:
    return all(eval_bexp(psi, b) for psi in assignments(domains, fv_bexp(b)))


def implies(b1: BExp, b2: BExp, domains: DomainMap) -> bool:
    """No assignment satisfies b1 without also satisfying b2."""
    names = fv_bexp(b1) | fv_bexp(b2)
    return all(
        eval_bexp(psi, b2) for psi in assignments(domains, names) if eval_bexp(psi, b1)
    )


def equivalent(b1: BExp, b2: BExp, domains: DomainMap) -> bool:
    return implies(b1, b2, domains) and implies(b2, b1, domains)


def canonicalize(b: BExp, domains: DomainMap) -> BExp:
    """A canonical equivalent form: true, false, or a disjunction of cases.

    Each case fixes every free variable of b to one domain value. The result
    is what the checker reports as the most general boolean; it is logically
    equivalent to b over the declared domains.
    """
    names = sorted(fv_bexp(b))
    sat = [psi for psi in assignments(domains, names) if eval_bexp(psi, b)]
    total = 1
    for n in names:
        total *= len(domains[n])
    if len(sat) == total:
        return TRUE
    if not sat:
        return FALSE
    return disj(conj(eq(Var(n), Lit(psi[n])) for n in names) for psi in sat)


# -- action matching -------------------------------------------------------


def action_eq_b(b: BExp, g1, g2, domains: DomainMap) -> bool:
    """Action equality under a boolean context.

    Classical outputs on the same channel are equal when b forces their
    expressions equal; every other pair must be identical (canonical bound
    names make that a plain comparison).
    """
    from .syntax import COut

    if isinstance(g1, COut) and isinstance(g2, COut):
        return g1.chan == g2.chan and implies(b, eq(g1.exp, g2.exp), domains)
    return g1 == g2


def action_eq_psi(psi: Mapping[str, Fraction], concrete, symbolic) -> bool:
    """Concrete-vs-symbolic action matching under an evaluation.

    A concrete output c!v matches a symbolic c!e when psi(e) = v; all other
    actions must coincide exactly.
    """
    from .syntax import COut

    if isinstance(concrete, COut) and isinstance(symbolic, COut):
        return concrete.chan == symbolic.chan and eval_exp(
            psi, concrete.exp
        ) == eval_exp(psi, symbolic.exp)
    return concrete == symbolic


# -- printing --------------------------------------------------------------


def pp_exp(e: Exp) -> str:
    match e:
        case Lit(v):
            return str(v)
        case Var(name):
            return name
        case Add(l, r):
            return f"({pp_exp(l)} + {pp_exp(r)})"
        case Sub(l, r):
            return f"({pp_exp(l)} - {pp_exp(r)})"
        case Mul(l, r):
            return f"({pp_exp(l)} * {pp_exp(r)})"
    raise TypeError(f"not an expression: {e!r}")


def pp_bexp(b: BExp) -> str:
    match b:
        case BLit(v):
            return "true" if v else "false"
        case Cmp(op, l, r):
            return f"{pp_exp(l)} {op} {pp_exp(r)}"
        case Not(x):
            return f"not ({pp_bexp(x)})"
        case And(l, r):
            return f"({pp_bexp(l)} and {pp_bexp(r)})"
        case Or(l, r):
            return f"({pp_bexp(l)} or {pp_bexp(r)})"
        case Imp(l, r):
            return f"({pp_bexp(l)} -> {pp_bexp(r)})"
    raise TypeError(f"not a boolean expression: {b!r}")
