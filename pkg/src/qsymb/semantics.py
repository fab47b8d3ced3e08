"""Symbolic operational semantics: snapshots, weighted distributions, qLTS.

A snapshot pairs a process term with the trace-preserving map accumulated so
far. Transitions carry a guard, an action, and a distribution whose weights
are completely positive maps summing to (an equivalent of) the identity.
Guards are collected, never evaluated: branches with unsatisfiable guards
stay in the graph.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from . import quantum
from .bexp import BExp, Exp, Lit, TRUE, band, pp_bexp
from .quantum import SuperOp, superop_eq
from .syntax import (
    Action,
    CIn,
    ConstCall,
    COut,
    If,
    Meas,
    Nil,
    Par,
    Prefix,
    Program,
    QIn,
    QOut,
    Relabel,
    Restrict,
    Sum,
    SuperOpApp,
    Tau,
    Term,
    cn,
    fresh_reg,
    fresh_var,
    fv,
    pp_action,
    pp_term,
    qv,
    subst_classical,
    subst_quantum,
    term_key,
    unfold,
)

_UNFOLD_LIMIT = 256


class StateCapExceeded(Exception):
    pass


@dataclass(frozen=True, eq=False)
class Snapshot:
    term: Term
    env: SuperOp

    def key(self):
        return term_key(self.term)

    def __repr__(self):
        return f"<<{pp_term(self.term)}>>"


def snapshot_eq(a: Snapshot, b: Snapshot, tol: float | None = None) -> bool:
    """Terms equal up to bound-name renaming, environments equal up to tol."""
    if a is b:
        return True
    return a.key() == b.key() and superop_eq(a.env, b.env, tol)


class SODist:
    """Finite map from snapshots to non-zero superoperator weights."""

    __slots__ = ("entries",)

    def __init__(self, pairs: Iterable[tuple[Snapshot, SuperOp]]):
        merged: list[tuple[Snapshot, SuperOp]] = []
        for sn, w in pairs:
            if w.is_zero():
                continue
            for i, (sn2, w2) in enumerate(merged):
                if snapshot_eq(sn, sn2):
                    merged[i] = (sn2, quantum.add(w2, w))
                    break
            else:
                merged.append((sn, w))
        self.entries: tuple[tuple[Snapshot, SuperOp], ...] = tuple(
            (sn, w) for sn, w in merged if not w.is_zero()
        )

    @classmethod
    def dirac(cls, sn: Snapshot) -> "SODist":
        return cls([(sn, SuperOp.identity(()))])

    @property
    def support(self) -> tuple[Snapshot, ...]:
        return tuple(sn for sn, _ in self.entries)

    def weight(self, sn: Snapshot) -> SuperOp:
        for s, w in self.entries:
            if snapshot_eq(s, sn):
                return w
        return SuperOp.zero(())

    def weight_sum(self) -> SuperOp:
        out = SuperOp.zero(())
        for _, w in self.entries:
            out = quantum.add(out, w)
        return out

    def scale(self, op: SuperOp) -> "SODist":
        """Apply op first, each weight after: the history composition E . Δ."""
        return SODist((sn, quantum.compose(w, op)) for sn, w in self.entries)

    def map_terms(self, f: Callable[[Term], Term]) -> "SODist":
        return SODist((Snapshot(f(sn.term), sn.env), w) for sn, w in self.entries)

    def __len__(self):
        return len(self.entries)

    def __repr__(self):
        return " + ".join(f"[{len(w.kraus)}K]*{sn!r}" for sn, w in self.entries)


def combine(weights: Sequence[SuperOp], dists: Sequence[SODist]) -> SODist:
    """Weighted sum of distributions; weight i is applied before dist i's own."""
    if len(weights) != len(dists):
        raise ValueError("weights and distributions must align")
    total = SuperOp.zero(())
    for w in weights:
        total = quantum.add(total, w)
    if not quantum.eqsim_v(total, SuperOp.identity(()), frozenset()):
        raise ValueError("weights do not sum to a trace-preserving map")
    return SODist(
        (sn, quantum.compose(inner, w))
        for w, d in zip(weights, dists)
        for sn, inner in d.entries
    )


@dataclass(frozen=True)
class SymTransition:
    guard: BExp
    action: Action
    target: SODist


# -- the transition relation ----------------------------------------------


def step(sn: Snapshot, prog: Program) -> list[SymTransition]:
    """All derivable transitions of a snapshot."""
    return _step(sn.term, sn.env, prog, _UNFOLD_LIMIT)


def _dirac(term: Term, env: SuperOp) -> SODist:
    return SODist.dirac(Snapshot(term, env))


def _step(t: Term, env: SuperOp, prog: Program, fuel: int) -> list[SymTransition]:
    universe = prog.registers
    match t:
        case Nil():
            return []

        case ConstCall(name, exps, regs):
            d = prog.defs.get(name)
            if d is None:
                raise ValueError(f"undefined process constant {name}")
            if fuel <= 0:
                raise StateCapExceeded(
                    f"unfolding {name} recursed {_UNFOLD_LIMIT} times within "
                    "one step; the recursion is not action-guarded"
                )
            return _step(unfold(d, exps, regs, universe), env, prog, fuel - 1)

        case Prefix(a, cont):
            match a:
                case Tau():
                    return [SymTransition(TRUE, Tau(), _dirac(cont, env))]
                case CIn(chan, x, dom):
                    nx = fresh_var(fv(cont) - {x})
                    body = subst_classical(cont, {x: _var(nx)})
                    return [
                        SymTransition(TRUE, CIn(chan, nx, dom), _dirac(body, env))
                    ]
                case COut(chan, e):
                    return [SymTransition(TRUE, COut(chan, e), _dirac(cont, env))]
                case QIn(chan, q):
                    # the source binder name is always a legal choice
                    return [SymTransition(TRUE, QIn(chan, q), _dirac(cont, env))]
                case QOut(chan, q):
                    return [SymTransition(TRUE, QOut(chan, q), _dirac(cont, env))]
                case SuperOpApp(_, _, op):
                    return [
                        SymTransition(
                            TRUE, Tau(), _dirac(cont, quantum.compose(op, env))
                        )
                    ]
                case Meas(_, _, x, m):
                    pairs = []
                    for lam, a_op, set_op in m.branches():
                        body = subst_classical(cont, {x: Lit(lam)})
                        pairs.append(
                            (Snapshot(body, quantum.compose(set_op, env)), a_op)
                        )
                    return [SymTransition(TRUE, Tau(), SODist(pairs))]
            raise TypeError(f"unknown action {a!r}")

        case Sum(l, r):
            return _step(l, env, prog, fuel) + _step(r, env, prog, fuel)

        case If(cond, body):
            return [
                SymTransition(band(cond, tr.guard), tr.action, tr.target)
                for tr in _step(body, env, prog, fuel)
            ]

        case Par(l, r):
            lt = _step(l, env, prog, fuel)
            rt = _step(r, env, prog, fuel)
            out: list[SymTransition] = []
            for tr in lt:
                lifted = _par_lift(tr, r, universe, right=True)
                if lifted is not None:
                    out.append(lifted)
            for tr in rt:
                lifted = _par_lift(tr, l, universe, right=False)
                if lifted is not None:
                    out.append(lifted)
            out.extend(_communications(lt, rt, env, universe, right=True))
            out.extend(_communications(rt, lt, env, universe, right=False))
            return out

        case Restrict(body, chans):
            out = []
            for tr in _step(body, env, prog, fuel):
                if cn(tr.action) & chans:
                    continue
                out.append(
                    SymTransition(
                        tr.guard,
                        tr.action,
                        tr.target.map_terms(lambda b: Restrict(b, chans)),
                    )
                )
            return out

        case Relabel(body, pairs):
            out = []
            for tr in _step(body, env, prog, fuel):
                out.append(
                    SymTransition(
                        tr.guard,
                        _relabel_action(tr.action, t),
                        tr.target.map_terms(lambda b: Relabel(b, pairs)),
                    )
                )
            return out

    raise TypeError(f"not a term: {t!r}")


def _var(name: str) -> Exp:
    from .bexp import Var

    return Var(name)


def _relabel_action(a: Action, rel: Relabel) -> Action:
    match a:
        case CIn(chan, var, dom):
            return CIn(rel.apply(chan), var, dom)
        case COut(chan, e):
            return COut(rel.apply(chan), e)
        case QIn(chan, reg):
            return QIn(rel.apply(chan), reg)
        case QOut(chan, reg):
            return QOut(rel.apply(chan), reg)
        case _:
            return a


def _the_point(tr: SymTransition) -> Snapshot:
    if len(tr.target) != 1:
        raise ValueError(f"expected a one-point target for {pp_action(tr.action)}")
    return tr.target.entries[0][0]


def _par_lift(
    tr: SymTransition, other: Term, universe, right: bool
) -> SymTransition | None:
    """Run one component's transition next to the other, renaming binders.

    Returns None when a quantum input cannot pick any register that is fresh
    for the passive side; no transition is derivable in that case.
    """

    def wrap(term: Term) -> Term:
        return Par(term, other) if right else Par(other, term)

    a = tr.action
    if isinstance(a, CIn):
        point = _the_point(tr)
        avoid = (fv(point.term) - {a.var}) | fv(other)
        nx = fresh_var(avoid)
        if nx != a.var:
            body = subst_classical(point.term, {a.var: _var(nx)})
            point = Snapshot(body, point.env)
            a = CIn(a.chan, nx, a.dom)
        return SymTransition(tr.guard, a, SODist.dirac(Snapshot(wrap(point.term), point.env)))
    if isinstance(a, QIn):
        point = _the_point(tr)
        if a.reg in qv(other):
            avoid = (qv(point.term) - {a.reg}) | qv(other)
            try:
                nr = fresh_reg(universe, avoid)
            except ValueError:
                return None
            body = subst_quantum(point.term, {a.reg: nr}, universe)
            point = Snapshot(body, point.env)
            a = QIn(a.chan, nr)
        return SymTransition(tr.guard, a, SODist.dirac(Snapshot(wrap(point.term), point.env)))
    return SymTransition(tr.guard, a, tr.target.map_terms(wrap))


def _communications(
    inp_side: list[SymTransition],
    out_side: list[SymTransition],
    env: SuperOp,
    universe,
    right: bool,
) -> list[SymTransition]:
    """Synchronise inputs of one component with outputs of the other.

    right=True means the input side is the left component of the parallel.
    """

    def pair(a: Term, b: Term) -> Term:
        return Par(a, b) if right else Par(b, a)

    out: list[SymTransition] = []
    for ti in inp_side:
        ai = ti.action
        if isinstance(ai, CIn):
            for to in out_side:
                ao = to.action
                if isinstance(ao, COut) and ao.chan == ai.chan:
                    t1 = _the_point(ti).term
                    t2 = _the_point(to).term
                    merged = subst_classical(t1, {ai.var: ao.exp})
                    out.append(
                        SymTransition(
                            band(ti.guard, to.guard),
                            Tau(),
                            _dirac(pair(merged, t2), env),
                        )
                    )
        elif isinstance(ai, QIn):
            for to in out_side:
                ao = to.action
                if isinstance(ao, QOut) and ao.chan == ai.chan:
                    t1 = _the_point(ti).term
                    t2 = _the_point(to).term
                    moved = subst_quantum(t1, {ai.reg: ao.reg}, universe)
                    out.append(
                        SymTransition(
                            band(ti.guard, to.guard),
                            Tau(),
                            _dirac(pair(moved, t2), env),
                        )
                    )
    return out


# -- reachability ----------------------------------------------------------


class QLTS:
    """Reachable snapshots with their outgoing transitions."""

    def __init__(self, states: list[Snapshot], transitions: list[list[SymTransition]]):
        self.states = states
        self.transitions = transitions

    @property
    def root(self) -> Snapshot:
        return self.states[0]

    def branching_points(self) -> int:
        count = 0
        for trs in self.transitions:
            for tr in trs:
                if len(tr.target) > 1:
                    count += 1
                elif len(tr.target) == 1 and not _is_plain_identity(
                    tr.target.entries[0][1]
                ):
                    count += 1
        return count

    def node_count(self) -> int:
        """Drawn graph size: snapshots plus explicit branching points."""
        return len(self.states) + self.branching_points()

    def transition_count(self) -> int:
        return sum(len(trs) for trs in self.transitions)

    def index_of(self, sn: Snapshot) -> int:
        for i, s in enumerate(self.states):
            if snapshot_eq(s, sn):
                return i
        raise KeyError(f"snapshot not in this system: {sn!r}")


def _is_plain_identity(w: SuperOp) -> bool:
    return superop_eq(w, SuperOp.identity(w.regs))


def reachable_qlts(root: Snapshot, prog: Program, cap: int = 10000) -> QLTS:
    """Breadth-first closure under step, deduplicating equal snapshots."""
    if cap < 1:
        raise ValueError("state cap must be at least 1")
    states: list[Snapshot] = [root]
    buckets: dict = {root.key(): [0]}
    transitions: list[list[SymTransition]] = []
    frontier = [0]
    while frontier:
        nxt: list[int] = []
        for idx in frontier:
            trs = step(states[idx], prog)
            transitions.append(trs)
            for tr in trs:
                for sn, _ in tr.target.entries:
                    key = sn.key()
                    found = False
                    for j in buckets.get(key, ()):
                        if superop_eq(states[j].env, sn.env):
                            found = True
                            break
                    if not found:
                        if len(states) >= cap:
                            raise StateCapExceeded(
                                f"more than {cap} reachable snapshots"
                            )
                        states.append(sn)
                        buckets.setdefault(key, []).append(len(states) - 1)
                        nxt.append(len(states) - 1)
        frontier = nxt
    return QLTS(states, transitions)


# -- export ----------------------------------------------------------------


def choi_fingerprint(op: SuperOp) -> str:
    """Short stable digest of a map's Choi matrix (rounded to 1e-9)."""
    j = np.round(op.choi() * 1e9).astype(np.complex128)
    return hashlib.sha1(j.tobytes()).hexdigest()[:12]


def _weight_label(w: SuperOp) -> str:
    if _is_plain_identity(w):
        return "I"
    return choi_fingerprint(w)


def qlts_to_json(q: QLTS) -> str:
    states = [
        {
            "id": i,
            "term": pp_term(sn.term),
            "qv": sorted(qv(sn.term)),
            "env": choi_fingerprint(sn.env),
        }
        for i, sn in enumerate(q.states)
    ]
    transitions = []
    for i, trs in enumerate(q.transitions):
        for tr in trs:
            transitions.append(
                {
                    "source": i,
                    "guard": pp_bexp(tr.guard),
                    "action": pp_action(tr.action),
                    "targets": [
                        {"state": q.index_of(sn), "weight": _weight_label(w)}
                        for sn, w in tr.target.entries
                    ],
                }
            )
    doc = {
        "format": "qsymb-qlts-1",
        "states": states,
        "transitions": transitions,
        "root": 0,
        "node_count": q.node_count(),
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def qlts_to_dot(q: QLTS) -> str:
    lines = ["digraph qlts {", "  rankdir=TB;", '  node [fontname="monospace"];']
    for i, sn in enumerate(q.states):
        label = pp_term(sn.term).replace("\\", "\\\\").replace('"', '\\"')
        shape = "doublecircle" if i == 0 else "ellipse"
        lines.append(f'  s{i} [label="{label}", shape={shape}];')
    dot_id = 0
    for i, trs in enumerate(q.transitions):
        for tr in trs:
            guard = pp_bexp(tr.guard)
            label = pp_action(tr.action) if guard == "true" else f"{guard}, {pp_action(tr.action)}"
            label = label.replace('"', '\\"')
            entries = tr.target.entries
            if len(entries) == 1 and _is_plain_identity(entries[0][1]):
                j = q.index_of(entries[0][0])
                lines.append(f'  s{i} -> s{j} [label="{label}"];')
            else:
                d = f"d{dot_id}"
                dot_id += 1
                lines.append(f'  {d} [shape=point, width=0.08];')
                lines.append(f'  s{i} -> {d} [label="{label}", arrowhead=none];')
                for sn, w in entries:
                    j = q.index_of(sn)
                    lines.append(
                        f'  {d} -> s{j} [label="{_weight_label(w)}", style=dashed];'
                    )
    lines.append("}")
    return "\n".join(lines) + "\n"
