"""Process terms: abstract syntax, binding structure, and well-formedness.

Terms are immutable dataclasses. Quantum channel names carry a leading ``@``
so classical and quantum channels can never collide. Register renaming and
classical substitution are capture avoiding; fresh classical names come from
the reserved ``_in``/``_s`` sequences, fresh registers from the program's
declared universe.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .bexp import (
    BExp,
    Exp,
    Var,
    fv_bexp,
    fv_exp,
    pp_bexp,
    pp_exp,
    subst_bexp,
    subst_exp,
)
from .quantum import Measurement, SuperOp

Pos = tuple[int, int]


# -- actions ---------------------------------------------------------------


class Action:
    pass


@dataclass(frozen=True)
class Tau(Action):
    pass


@dataclass(frozen=True)
class CIn(Action):
    """Classical input c?x; binds x with the channel's declared domain."""

    chan: str
    var: str
    dom: tuple[Fraction, ...] = field(compare=False, default=())


@dataclass(frozen=True)
class COut(Action):
    chan: str
    exp: Exp


@dataclass(frozen=True)
class QIn(Action):
    """Quantum input @c?q; binds the register q."""

    chan: str
    reg: str


@dataclass(frozen=True)
class QOut(Action):
    chan: str
    reg: str


@dataclass(frozen=True)
class SuperOpApp(Action):
    """Apply a named trace-preserving map to registers, e.g. ``H[q]``.

    The resolved operator is carried along but excluded from comparisons:
    the (name, regs) pair determines it.
    """

    name: str
    regs: tuple[str, ...]
    op: SuperOp = field(compare=False, default=None)


@dataclass(frozen=True)
class Meas(Action):
    """Projective measurement M[q~; x]; binds x to the observed eigenvalue."""

    name: str
    regs: tuple[str, ...]
    var: str
    meas: Measurement = field(compare=False, default=None)


def cn(a: Action) -> frozenset[str]:
    """Channel names mentioned by an action (used by restriction)."""
    match a:
        case CIn(chan, _) | COut(chan, _) | QIn(chan, _) | QOut(chan, _):
            return frozenset((chan,))
        case _:
            return frozenset()


def qbv(a: Action) -> frozenset[str]:
    if isinstance(a, QIn):
        return frozenset((a.reg,))
    return frozenset()


def bv(a: Action) -> frozenset[str]:
    if isinstance(a, (CIn, Meas)):
        return frozenset((a.var,))
    return frozenset()


def fv_action(a: Action) -> frozenset[str]:
    if isinstance(a, COut):
        return fv_exp(a.exp)
    return frozenset()


def pp_action(a: Action) -> str:
    match a:
        case Tau():
            return "tau"
        case CIn(chan, var):
            return f"{chan}?{var}"
        case COut(chan, exp):
            return f"{chan}!{pp_exp(exp)}"
        case QIn(chan, reg):
            return f"{chan}?{reg}"
        case QOut(chan, reg):
            return f"{chan}!{reg}"
        case SuperOpApp(name, regs):
            return f"{name}[{','.join(regs)}]"
        case Meas(name, regs, var):
            return f"{name}[{','.join(regs)};{var}]"
    raise TypeError(f"not an action: {a!r}")


# -- terms -----------------------------------------------------------------


class Term:
    pass


@dataclass(frozen=True)
class Nil(Term):
    pos: Pos | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class ConstCall(Term):
    name: str
    exps: tuple[Exp, ...] = ()
    regs: tuple[str, ...] = ()
    pos: Pos | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Prefix(Term):
    action: Action
    cont: Term
    pos: Pos | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Sum(Term):
    left: Term
    right: Term
    pos: Pos | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Par(Term):
    left: Term
    right: Term
    pos: Pos | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Restrict(Term):
    body: Term
    chans: frozenset[str]
    pos: Pos | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Relabel(Term):
    """Channel relabelling t[f]; pairs are (new, old), applied to free names."""

    body: Term
    pairs: tuple[tuple[str, str], ...]
    pos: Pos | None = field(default=None, compare=False, repr=False)

    def apply(self, chan: str) -> str:
        for new, old in self.pairs:
            if old == chan:
                return new
        return chan


@dataclass(frozen=True)
class If(Term):
    cond: BExp
    body: Term
    pos: Pos | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class ProcDef:
    name: str
    params: tuple[str, ...]
    qparams: tuple[str, ...]
    body: Term


# -- free variables --------------------------------------------------------


def qv(t: Term) -> frozenset[str]:
    """Free quantum variables (registers) of a term."""
    match t:
        case Nil():
            return frozenset()
        case ConstCall(_, _, regs):
            return frozenset(regs)
        case Prefix(a, cont):
            inner = qv(cont)
            match a:
                case QIn(_, reg):
                    return inner - {reg}
                case QOut(_, reg):
                    return inner | {reg}
                case SuperOpApp(_, regs) | Meas(_, regs, _):
                    return inner | frozenset(regs)
                case _:
                    return inner
        case Sum(l, r) | Par(l, r):
            return qv(l) | qv(r)
        case Restrict(body, _) | Relabel(body, _):
            return qv(body)
        case If(_, body):
            return qv(body)
    raise TypeError(f"not a term: {t!r}")


def fv(t: Term) -> frozenset[str]:
    """Free classical variables; c?x and M[q~;x] bind x."""
    match t:
        case Nil():
            return frozenset()
        case ConstCall(_, exps, _):
            out: frozenset[str] = frozenset()
            for e in exps:
                out |= fv_exp(e)
            return out
        case Prefix(a, cont):
            inner = fv(cont)
            match a:
                case CIn(_, var) | Meas(_, _, var):
                    return inner - {var}
                case COut(_, exp):
                    return inner | fv_exp(exp)
                case _:
                    return inner
        case Sum(l, r) | Par(l, r):
            return fv(l) | fv(r)
        case Restrict(body, _) | Relabel(body, _):
            return fv(body)
        case If(cond, body):
            return fv_bexp(cond) | fv(body)
    raise TypeError(f"not a term: {t!r}")


# -- well-formedness -------------------------------------------------------


def _fmt_pos(pos: Pos | None) -> str:
    return f" at {pos[0]}:{pos[1]}" if pos else ""


def well_formed(
    t: Term, defs: Mapping[str, ProcDef] | None = None
) -> list[str]:
    """Static side conditions; returns a list of violations (empty = ok).

    Checks that a sent register does not stay free in the continuation, that
    parallel components own disjoint registers, and that constant calls
    resolve with the right arities.
    """
    out: list[str] = []

    def walk(t: Term) -> None:
        match t:
            case Nil():
                pass
            case ConstCall(name, exps, regs):
                if defs is not None:
                    d = defs.get(name)
                    if d is None:
                        out.append(f"unknown process constant {name}{_fmt_pos(t.pos)}")
                    else:
                        if len(exps) != len(d.params):
                            out.append(
                                f"{name} expects {len(d.params)} classical "
                                f"argument(s), got {len(exps)}{_fmt_pos(t.pos)}"
                            )
                        if len(regs) != len(d.qparams):
                            out.append(
                                f"{name} expects {len(d.qparams)} register "
                                f"argument(s), got {len(regs)}{_fmt_pos(t.pos)}"
                            )
                if len(set(regs)) != len(regs):
                    out.append(f"repeated register argument in {name}{_fmt_pos(t.pos)}")
            case Prefix(a, cont):
                if isinstance(a, QOut) and a.reg in qv(cont):
                    out.append(
                        f"register {a.reg} sent on {a.chan} but still used "
                        f"afterwards{_fmt_pos(t.pos)}"
                    )
                if isinstance(a, (SuperOpApp, Meas)) and len(set(a.regs)) != len(
                    a.regs
                ):
                    out.append(
                        f"repeated register in {pp_action(a)}{_fmt_pos(t.pos)}"
                    )
                walk(cont)
            case Sum(l, r):
                walk(l)
                walk(r)
            case Par(l, r):
                shared = qv(l) & qv(r)
                if shared:
                    out.append(
                        "parallel components share register(s) "
                        f"{{{', '.join(sorted(shared))}}}{_fmt_pos(t.pos)}"
                    )
                walk(l)
                walk(r)
            case Restrict(body, _) | Relabel(body, _):
                walk(body)
            case If(_, body):
                walk(body)
            case _:
                raise TypeError(f"not a term: {t!r}")

    walk(t)
    return out


def check_defs(defs: Mapping[str, ProcDef]) -> list[str]:
    """Static checks for every defining equation.

    Classical variables must be covered by the parameter list; registers may
    be used globally (quantum parameters exist for call-site retargeting, and
    unfold rejects captures against the remaining global registers).
    """
    out: list[str] = []
    for d in defs.values():
        loose = fv(d.body) - set(d.params)
        if loose:
            out.append(
                f"definition {d.name}: free classical variable(s) "
                f"{{{', '.join(sorted(loose))}}} not among parameters"
            )
        out.extend(well_formed(d.body, defs))
    return out


# -- fresh names -----------------------------------------------------------


def fresh_var(avoid: Iterable[str], prefix: str = "_in") -> str:
    """First name of the reserved sequence not in avoid."""
    avoid = set(avoid)
    i = 0
    while f"{prefix}{i}" in avoid:
        i += 1
    return f"{prefix}{i}"


def fresh_reg(universe: Sequence[str], avoid: Iterable[str]) -> str:
    """Lexicographically first register of the universe not in avoid."""
    avoid = set(avoid)
    for r in sorted(universe):
        if r not in avoid:
            return r
    raise ValueError(
        f"no spare register in universe {sorted(universe)} avoiding {sorted(avoid)}"
    )


# -- substitution ----------------------------------------------------------


def _rename_action_regs(a: Action, ren: Mapping[str, str]) -> Action:
    match a:
        case QOut(chan, reg):
            return QOut(chan, ren.get(reg, reg))
        case SuperOpApp(name, regs, op):
            new = tuple(ren.get(r, r) for r in regs)
            if new == regs:
                return a
            sub = {r: ren[r] for r in regs if r in ren}
            return SuperOpApp(name, new, op.rename(sub) if op is not None else None)
        case Meas(name, regs, var, meas):
            new = tuple(ren.get(r, r) for r in regs)
            if new == regs:
                return a
            sub = {r: ren[r] for r in regs if r in ren}
            return Meas(name, new, var, meas.rename(sub) if meas is not None else None)
        case _:
            return a


def subst_quantum(
    t: Term, ren: Mapping[str, str], universe: Sequence[str] = ()
) -> Term:
    """Rename free register occurrences, avoiding capture at quantum inputs."""
    ren = {k: v for k, v in ren.items() if k != v}
    if not ren:
        return t
    match t:
        case Nil():
            return t
        case ConstCall(name, exps, regs):
            return ConstCall(name, exps, tuple(ren.get(r, r) for r in regs), pos=t.pos)
        case Prefix(QIn(chan, reg) as a, cont):
            inner = {k: v for k, v in ren.items() if k != reg}
            if reg in inner.values() and (set(inner) & qv(cont)):
                if not universe:
                    raise ValueError(
                        f"renaming would capture register {reg}; "
                        "a register universe is required to pick a fresh one"
                    )
                clash = fresh_reg(
                    universe, qv(cont) | set(inner.values()) | set(inner)
                )
                cont = subst_quantum(cont, {reg: clash}, universe)
                reg = clash
            return Prefix(QIn(chan, reg), subst_quantum(cont, inner, universe), pos=t.pos)
        case Prefix(a, cont):
            return Prefix(
                _rename_action_regs(a, ren), subst_quantum(cont, ren, universe), pos=t.pos
            )
        case Sum(l, r):
            return Sum(subst_quantum(l, ren, universe), subst_quantum(r, ren, universe), pos=t.pos)
        case Par(l, r):
            return Par(subst_quantum(l, ren, universe), subst_quantum(r, ren, universe), pos=t.pos)
        case Restrict(body, chans):
            return Restrict(subst_quantum(body, ren, universe), chans, pos=t.pos)
        case Relabel(body, pairs):
            return Relabel(subst_quantum(body, ren, universe), pairs, pos=t.pos)
        case If(cond, body):
            return If(cond, subst_quantum(body, ren, universe), pos=t.pos)
    raise TypeError(f"not a term: {t!r}")


def subst_classical(t: Term, sub: Mapping[str, Exp]) -> Term:
    """Substitute expressions for free classical variables, capture avoiding."""
    sub = {k: v for k, v in sub.items() if v != Var(k)}
    if not sub:
        return t

    def image_fv() -> frozenset[str]:
        out: frozenset[str] = frozenset()
        for e in sub.values():
            out |= fv_exp(e)
        return out

    match t:
        case Nil():
            return t
        case ConstCall(name, exps, regs):
            return ConstCall(name, tuple(subst_exp(e, sub) for e in exps), regs, pos=t.pos)
        case Prefix(a, cont):
            binder = bv(a)
            if binder:
                (x,) = binder
                inner = {k: v for k, v in sub.items() if k != x}
                if not inner:
                    return Prefix(a, cont, pos=t.pos)
                imgs = frozenset()
                for e in inner.values():
                    imgs |= fv_exp(e)
                if x in imgs:
                    # the binder would capture a substituted variable
                    nx = fresh_var(imgs | fv(cont) | set(inner), prefix="_s")
                    cont = subst_classical(cont, {x: Var(nx)})
                    a = _rebind(a, nx)
                    x = nx
                return Prefix(a, subst_classical(cont, inner), pos=t.pos)
            if isinstance(a, COut):
                a = COut(a.chan, subst_exp(a.exp, sub))
            return Prefix(a, subst_classical(cont, sub), pos=t.pos)
        case Sum(l, r):
            return Sum(subst_classical(l, sub), subst_classical(r, sub), pos=t.pos)
        case Par(l, r):
            return Par(subst_classical(l, sub), subst_classical(r, sub), pos=t.pos)
        case Restrict(body, chans):
            return Restrict(subst_classical(body, sub), chans, pos=t.pos)
        case Relabel(body, pairs):
            return Relabel(subst_classical(body, sub), pairs, pos=t.pos)
        case If(cond, body):
            return If(subst_bexp(cond, sub), subst_classical(body, sub), pos=t.pos)
    raise TypeError(f"not a term: {t!r}")


def _rebind(a: Action, var: str) -> Action:
    match a:
        case CIn(chan, _, dom):
            return CIn(chan, var, dom)
        case Meas(name, regs, _, meas):
            return Meas(name, regs, var, meas)
    raise TypeError(f"action {a!r} binds no classical variable")


def alpha_rename(t: Term, fresh: str) -> Term:
    """Rename the top-level binder of a prefix to a fresh name."""
    if not isinstance(t, Prefix):
        raise ValueError("alpha_rename expects a prefix term")
    a = t.action
    if isinstance(a, QIn):
        if fresh == a.reg:
            return t
        if fresh in qv(t.cont):
            raise ValueError(f"register {fresh} not fresh for the continuation")
        return Prefix(QIn(a.chan, fresh), subst_quantum(t.cont, {a.reg: fresh}), pos=t.pos)
    if isinstance(a, (CIn, Meas)):
        if fresh == a.var:
            return t
        if fresh in fv(t.cont):
            raise ValueError(f"variable {fresh} not fresh for the continuation")
        return Prefix(
            _rebind(a, fresh), subst_classical(t.cont, {a.var: Var(fresh)}), pos=t.pos
        )
    raise ValueError("top-level action binds nothing")


def unfold(d: ProcDef, exps: Sequence[Exp], regs: Sequence[str], universe: Sequence[str] = ()) -> Term:
    """Instantiate a defining equation: body with both parameter lists bound."""
    if len(exps) != len(d.params) or len(regs) != len(d.qparams):
        raise ValueError(f"arity mismatch unfolding {d.name}")
    ren = dict(zip(d.qparams, regs))
    captured = (qv(d.body) - set(d.qparams)) & {v for k, v in ren.items() if k != v}
    if captured:
        raise ValueError(
            f"unfolding {d.name} would capture global register(s) "
            f"{sorted(captured)}"
        )
    body = subst_quantum(d.body, ren, universe)
    return subst_classical(body, dict(zip(d.params, (e for e in exps))))


# -- canonical keys --------------------------------------------------------


def term_key(t: Term):
    """A hashable key identifying terms up to renaming of bound names.

    Bound classical variables and registers are numbered in binding order;
    free names are kept verbatim. Used for visited-set and table buckets.
    """

    def walk(t: Term, cmap: dict[str, str], qmap: dict[str, str]):
        def ex(e: Exp) -> Exp:
            return subst_exp(e, {k: Var(v) for k, v in cmap.items()})

        def bx(b: BExp) -> BExp:
            return subst_bexp(b, {k: Var(v) for k, v in cmap.items()})

        def rg(r: str) -> str:
            return qmap.get(r, r)

        match t:
            case Nil():
                return ("nil",)
            case ConstCall(name, exps, regs):
                return ("call", name, tuple(ex(e) for e in exps), tuple(rg(r) for r in regs))
            case Prefix(a, cont):
                match a:
                    case Tau():
                        ak = ("tau",)
                        return ("pre", ak, walk(cont, cmap, qmap))
                    case CIn(chan, var):
                        n = f"#c{sum(1 for v in cmap.values() if v.startswith('#c'))}"
                        ak = ("cin", chan, n)
                        return ("pre", ak, walk(cont, {**cmap, var: n}, qmap))
                    case COut(chan, exp):
                        return ("pre", ("cout", chan, ex(exp)), walk(cont, cmap, qmap))
                    case QIn(chan, reg):
                        n = f"#q{sum(1 for v in qmap.values() if v.startswith('#q'))}"
                        ak = ("qin", chan, n)
                        return ("pre", ak, walk(cont, cmap, {**qmap, reg: n}))
                    case QOut(chan, reg):
                        return ("pre", ("qout", chan, rg(reg)), walk(cont, cmap, qmap))
                    case SuperOpApp(name, regs):
                        ak = ("op", name, tuple(rg(r) for r in regs))
                        return ("pre", ak, walk(cont, cmap, qmap))
                    case Meas(name, regs, var):
                        n = f"#c{sum(1 for v in cmap.values() if v.startswith('#c'))}"
                        ak = ("meas", name, tuple(rg(r) for r in regs), n)
                        return ("pre", ak, walk(cont, {**cmap, var: n}, qmap))
            case Sum(l, r):
                return ("sum", walk(l, cmap, qmap), walk(r, cmap, qmap))
            case Par(l, r):
                return ("par", walk(l, cmap, qmap), walk(r, cmap, qmap))
            case Restrict(body, chans):
                return ("res", walk(body, cmap, qmap), tuple(sorted(chans)))
            case Relabel(body, pairs):
                return ("rel", walk(body, cmap, qmap), pairs)
            case If(cond, body):
                return ("if", bx(cond), walk(body, cmap, qmap))
        raise TypeError(f"not a term: {t!r}")

    return walk(t, {}, {})


def alpha_eq(a: Term, b: Term) -> bool:
    return term_key(a) == term_key(b)


# -- printing --------------------------------------------------------------


def pp_term(t: Term) -> str:
    def atom(t: Term) -> str:
        s = pp_term(t)
        if isinstance(t, (Sum, Par, If)):
            return f"({s})"
        return s

    def post_atom(t: Term) -> str:
        # restriction/relabelling bind to the smallest unit on reparse,
        # so anything but a bare leaf needs parentheses
        s = pp_term(t)
        if isinstance(t, (Nil, ConstCall)):
            return s
        return f"({s})"

    match t:
        case Nil():
            return "nil"
        case ConstCall(name, exps, regs):
            if not exps and not regs:
                return name
            es = ",".join(pp_exp(e) for e in exps)
            return f"{name}({es};{','.join(regs)})"
        case Prefix(a, cont):
            return f"{pp_action(a)}.{atom(cont)}"
        case Sum(l, r):
            ls = pp_term(l) if isinstance(l, (Sum, Prefix, Nil, ConstCall, If)) else f"({pp_term(l)})"
            rs = pp_term(r) if isinstance(r, (Prefix, Nil, ConstCall, If)) else f"({pp_term(r)})"
            return f"{ls} + {rs}"
        case Par(l, r):
            ls = pp_term(l) if isinstance(l, (Par, Prefix, Nil, ConstCall)) else f"({pp_term(l)})"
            rs = pp_term(r) if isinstance(r, (Prefix, Nil, ConstCall)) else f"({pp_term(r)})"
            return f"{ls} || {rs}"
        case Restrict(body, chans):
            return f"{post_atom(body)} \\ {{{','.join(sorted(chans))}}}"
        case Relabel(body, pairs):
            ps = ",".join(f"{new}/{old}" for new, old in pairs)
            return f"{post_atom(body)}[{ps}]"
        case If(cond, body):
            return f"if {pp_bexp(cond)} then {atom(body)}"
    raise TypeError(f"not a term: {t!r}")


# -- program container -----------------------------------------------------


@dataclass(frozen=True)
class OpDecl:
    """A named operator binding from the ops section.

    kind is one of set/proj/measure; set and proj carry a state label whose
    length fixes the arity, measure carries an explicit register count.
    """

    name: str
    kind: str
    label: str = ""
    arity: int = 1

    def instantiate(self, regs: tuple[str, ...]):
        from . import quantum

        if len(regs) != self.arity:
            raise ValueError(
                f"{self.name} expects {self.arity} register(s), got {len(regs)}"
            )
        if self.kind == "set":
            return quantum.set_state(self.label, regs)
        if self.kind == "proj":
            return quantum.proj_state(self.label, regs)
        if self.kind == "measure":
            return quantum.measure_comp(regs)
        raise ValueError(f"unknown op kind {self.kind}")


@dataclass(frozen=True)
class CheckDirective:
    kind: str
    operands: tuple[str, ...]
    options: tuple[tuple[str, str], ...] = ()


@dataclass
class Program:
    registers: tuple[str, ...] = ()
    domains: dict[str, tuple[Fraction, ...]] = field(default_factory=dict)
    channels: dict[str, tuple[Fraction, ...] | None] = field(default_factory=dict)
    ops: dict[str, OpDecl] = field(default_factory=dict)
    defs: dict[str, ProcDef] = field(default_factory=dict)
    checks: list[CheckDirective] = field(default_factory=list)

    def validate(self) -> list[str]:
        out = check_defs(self.defs)
        for name, dom in self.channels.items():
            if not name.startswith("@") and dom is None:
                out.append(f"classical channel {name} lacks a domain")
        return out
